#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/shape.hpp"

namespace shapeproxy {

/// Thresholds shared by detection and tracking.
struct InlierCriteria {
    double dist_epsilon = 0.008;         // meters, before noise modulation
    double normal_epsilon = 0.349065850; // radians (20 deg)
    bool modulate_by_noise = true;
    double noise_factor = 3.0;
    NoiseModel noise;

    /// Distance threshold for a sample observed at depth z:
    /// max(dist_epsilon, noise_factor * sigma(z)) when modulation is on.
    double distance_threshold(double z) const;
    double cos_normal_threshold() const;
    bool accepts(const ShapeModel& shape, const Vec3& p, const Vec3& n, double z) const;
};

struct DetectionParams {
    InlierCriteria inlier;
    std::size_t min_inliers = 0;          // 0 selects min_inlier_fraction * |cloud|
    double min_inlier_fraction = 0.025;
    double success_probability = 0.99;
    std::size_t subset_count = 5000;      // scoring subset size, capped at |cloud|
    int candidates_per_round = 4;
    int octree_levels = 8;
    std::size_t max_candidates = 20000;
    double min_radius = 0.02;
    double max_radius = 3.0;
    bool planes = true;
    bool cylinders = true;
    bool spheres = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DetectedShape {
    ShapeModel shape;
    std::vector<std::size_t> inliers;  // indices into the input cloud
};

/// Greedy RANSAC extraction of planes, cylinders and spheres.
///
/// Minimal sets are drawn from octree cells of a random level around a random
/// seed point. Candidates are scored on random subsets with extrapolated counts
/// and the best one is extracted once the probability of having missed a
/// larger shape drops below 1 - success_probability. Inlier sets are disjoint.
/// Positions are expected in camera space (z is the viewing depth).
std::vector<DetectedShape> detect_shapes(const OrientedPointCloud& cloud,
                                         const DetectionParams& params);

/// Shape through a minimal oriented sample; nullopt for degenerate configurations.
/// Planes need 3 points; spheres and cylinders use the first 2 points and normals.
std::optional<ShapeModel> fit_minimal(ShapeKind kind, std::span<const Vec3> points,
                                      std::span<const Vec3> normals);

/// Least-squares re-estimate. Keeps the input frame orientation where possible.
/// Returns the input unchanged when the system is rank deficient or the mean
/// absolute distance would increase.
ShapeModel refit(const ShapeModel& shape, std::span<const Vec3> inliers);

double mean_abs_distance(const ShapeModel& shape, std::span<const Vec3> points);

}  // namespace shapeproxy
