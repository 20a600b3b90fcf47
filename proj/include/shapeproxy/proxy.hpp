#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "shapeproxy/detect.hpp"
#include "shapeproxy/frame.hpp"
#include "shapeproxy/shape.hpp"
#include "shapeproxy/stats.hpp"

namespace shapeproxy {

enum class ProxyStatus : std::uint8_t { Active = 0, Probation = 1 };

/// Streaming mean and variance of a parameter vector (Welford, with Chan's
/// combination for merges).
struct ParamStats {
    long count = 0;
    Eigen::VectorXd mean;
    Eigen::VectorXd m2;

    void add(const Eigen::VectorXd& x);
    void combine(const ParamStats& other);
    Eigen::VectorXd variance() const;
};

/// Parameter vector of a shape in world space:
/// plane (n, n.C), cylinder (A, foot of the world origin on the axis, r), sphere (C, r).
Eigen::VectorXd shape_params(const ShapeModel& shape);
/// Rebuilds a shape from a (mean) parameter vector, keeping the local frame of
/// `reference` as far as possible.
ShapeModel shape_from_params(const Eigen::VectorXd& params, const ShapeModel& reference);

using CellMap = std::unordered_map<CellKey, Cell, CellKeyHash>;

struct Proxy {
    std::uint32_t id = 0;
    ShapeModel shape;  // world space
    GridSpec spec;
    CellMap cells;
    ProxyStatus status = ProxyStatus::Active;
    int frames_seen = 1;
    int frames_since_support = 0;
    ParamStats stats;
    double view_distance = 0.0;  // running mean of sample depths
    long view_samples = 0;
    int last_votes = 0;

    std::size_t emitting_cells() const;
};

struct ProxyParams {
    InlierCriteria inlier;
    double cell_size = 0.05;
    int color_res_log2 = 2;
    int keep_threshold = 50;
    int purge_after = 30;
    int veteran_after = 300;
    double visit_threshold = 0.25;
    double slh_merge_width = 2.0;
    double slh_min_sigma = 0.003;
    double color_alpha = 3.0;
    double merge_angle = 0.17453292519943295;  // 10 deg
    double merge_offset = 0.05;
    double merge_radius = 0.02;
    double merge_bounds_margin = 0.25;
    double occlusion_margin = 0.05;
    std::size_t refit_samples = 2000;
};

/// Dominant orthogonal directions of the scene. Columns are (h1, h2, vertical).
struct ManhattanAxes {
    Mat3 axes = Mat3::Identity();
    bool fallback = true;

    Vec3 h1() const { return axes.col(0); }
    Vec3 h2() const { return axes.col(1); }
    Vec3 vertical() const { return axes.col(2); }
};

struct SceneState {
    std::vector<Proxy> proxies;  // ascending id
    ManhattanAxes manhattan;
    CameraIntrinsics intrinsics;
    int frame_index = 0;
    std::uint32_t next_id = 1;

    const Proxy* find(std::uint32_t id) const;
    Proxy* find(std::uint32_t id);
};

/// Samples in world space with their depth in the source camera.
struct WorldSamples {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    std::vector<Rgb> colors;
    std::vector<double> depths;
    std::vector<int> pixel_of;

    std::size_t size() const { return positions.size(); }
    static WorldSamples from_cloud(const OrientedPointCloud& cloud, const CameraPose& pose);
    WorldSamples subset(std::span<const std::size_t> idx) const;
};

/// Manhattan frame from planes detected in world-space clouds. Near-horizontal
/// planes vote for the vertical, near-vertical ones for h1. `up_hint` breaks
/// sign ties and stands in when no floor is found.
ManhattanAxes init_manhattan(std::span<const OrientedPointCloud> world_clouds, const Vec3& up_hint,
                             const DetectionParams& detection = {});
/// Same, from already detected world-space planes with their inlier counts.
ManhattanAxes manhattan_from_planes(std::span<const DetectedShape> planes, const Vec3& up_hint);

struct TrackResult {
    std::vector<int> owner;          // per sample: index into state.proxies, or -1
    std::vector<std::size_t> votes;  // per proxy
    std::vector<bool> supported;     // votes >= keep_threshold
};

/// Voting: every sample votes for the first proxy (lowest id) it is an inlier of.
TrackResult track(const SceneState& state, const WorldSamples& samples, const ProxyParams& params);

/// Per-frame refit from the voters, running parameter average, cell accumulation.
void update_proxy(Proxy& proxy, const WorldSamples& samples, std::span<const std::size_t> voters,
                  const CameraPose& pose, const SceneState& state, const ProxyParams& params,
                  int frame_index);

/// Projects samples onto the proxy along camera rays and folds distance and
/// color into the cells they land in. Returns the keys of touched cells.
std::vector<CellKey> accumulate(Proxy& proxy, const WorldSamples& samples,
                                std::span<const std::size_t> idx, const Vec3& camera_origin,
                                const CameraIntrinsics& intrinsics, const ProxyParams& params,
                                int frame_index);

/// New proxy from a detected world-space shape, with a Manhattan-aligned frame.
Proxy register_candidate(SceneState& state, const ShapeModel& shape, const WorldSamples& samples,
                         std::span<const std::size_t> inliers, const CameraPose& pose,
                         const ProxyParams& params);

/// Local frame for a shape given the Manhattan axes: walls get u horizontal and
/// v vertical; floors follow h1; cylinder A points along its nearest axis.
ShapeModel align_frame(const ShapeModel& shape, const ManhattanAxes& axes, const Vec3& camera_origin);

/// Advances the visit windows of the cells in view of `pose`. Cells touched in
/// `frame_index` count as visited.
void update_visits(Proxy& proxy, const RgbdFrame& frame, const ProxyParams& params, int frame_index);
bool cell_in_view(const Proxy& proxy, const CellKey& key, const RgbdFrame& frame, double margin);

/// Probation / purge transitions from this frame's support flags.
void lifecycle_step(SceneState& state, const std::vector<bool>& supported, const ProxyParams& params);

/// True when the two proxies describe the same surface under the thresholds.
bool similar(const Proxy& a, const Proxy& b, const ProxyParams& params);
/// Folds `donor` into `keeper` (cells re-keyed into the keeper's grid).
void merge_into(Proxy& keeper, const Proxy& donor, const ProxyParams& params);
/// Merges similar pairs; the older id survives. Returns the number of merges.
int merge_similar(SceneState& state, const ProxyParams& params);

/// World-space (u, v) rectangle covered by a proxy's cells, in `frame`'s coordinates.
struct UvBounds {
    double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
    bool empty = true;
};
UvBounds cell_bounds_in(const Proxy& proxy, const ShapeModel& frame);

}  // namespace shapeproxy
