#include "shapeproxy/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace shapeproxy {

namespace {

constexpr std::size_t kSampleSize = 3;

Vec3 orthogonal_part(const Vec3& v, const Vec3& axis) { return v - v.dot(axis) * axis; }

/// Closest points between lines p1 + s d1 and p2 + t d2 (unit directions).
/// Returns false when the lines are parallel.
bool closest_points(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2, Vec3& c1,
                    Vec3& c2) {
    const Vec3 w0 = p1 - p2;
    const double b = d1.dot(d2);
    const double d = d1.dot(w0);
    const double e = d2.dot(w0);
    const double denom = 1.0 - b * b;
    if (denom < 1e-10) return false;
    const double s = (b * e - d) / denom;
    const double t = (e - b * d) / denom;
    c1 = p1 + s * d1;
    c2 = p2 + t * d2;
    return true;
}

ShapeModel plane_refit(const ShapeModel& shape, std::span<const Vec3> pts) {
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.info() != Eigen::Success) return shape;
    const auto& ev = eig.eigenvalues();
    const double scale = std::max(ev[2], 1e-300);
    if (ev[1] <= 1e-14 * scale) return shape;  // collinear
    Vec3 n = eig.eigenvectors().col(0).normalized();
    const Vec3 old_n = shape.axis();
    if (n.dot(old_n) < 0.0) n = -n;

    Vec3 x = orthogonal_part(shape.axis_x, n);
    if (x.norm() < 1e-6) x = orthogonal_part(shape.axis_y, n).cross(n);
    x.normalize();
    ShapeModel out = shape;
    out.origin = shape.origin - (shape.origin - mean).dot(n) * n;
    out.axis_x = x;
    out.axis_y = n.cross(x);
    return out;
}

ShapeModel sphere_refit(const ShapeModel& shape, std::span<const Vec3> pts) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd b(n);
    // Center the system for conditioning.
    const Vec3 ref = shape.origin;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 p = pts[i] - ref;
        a.row(i) << 2.0 * p.x(), 2.0 * p.y(), 2.0 * p.z(), 1.0;
        b[i] = p.squaredNorm();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < 4) return shape;
    const Eigen::Vector4d sol = qr.solve(b);
    Vec3 c = sol.head<3>();
    const double r2 = sol[3] + c.squaredNorm();
    if (!(r2 > 0.0)) return shape;
    double r = std::sqrt(r2);

    // Geometric Gauss-Newton polish; the algebraic fit is biased on partial caps.
    for (int iter = 0; iter < 8; ++iter) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        for (const auto& pw : pts) {
            const Vec3 d = pw - ref - c;
            const double len = d.norm();
            if (len <= 0.0) continue;
            Eigen::Vector4d j;
            j.head<3>() = -d / len;
            j[3] = -1.0;
            const double res = len - r;
            jtj += j * j.transpose();
            jtr += j * res;
        }
        Eigen::LDLT<Eigen::Matrix4d> ldlt(jtj);
        if (ldlt.info() != Eigen::Success) break;
        const Eigen::Vector4d step = ldlt.solve(-jtr);
        if (!step.allFinite()) break;
        c += step.head<3>();
        r += step[3];
        if (step.norm() < 1e-13) break;
    }
    if (!(r > 0.0) || !c.allFinite()) return shape;
    ShapeModel out = shape;
    out.origin = ref + c;
    out.radius = r;
    return out;
}

struct CylinderParams {
    Vec3 axis;
    Vec3 point;
    double radius;
};

CylinderParams apply_step(const ShapeModel& base, const Eigen::Matrix<double, 5, 1>& s) {
    const Vec3 a = (base.axis() + s[0] * base.axis_x + s[1] * base.axis_y).normalized();
    return {a, base.origin + s[2] * base.axis_x + s[3] * base.axis_y, base.radius + s[4]};
}

double cylinder_residual(const CylinderParams& c, const Vec3& p) {
    return orthogonal_part(p - c.point, c.axis).norm() - c.radius;
}

ShapeModel cylinder_refit(const ShapeModel& shape, std::span<const Vec3> pts) {
    using Vec5 = Eigen::Matrix<double, 5, 1>;
    using Mat5 = Eigen::Matrix<double, 5, 5>;
    ShapeModel current = shape;
    double lambda = 1e-3;
    auto cost_of = [&](const CylinderParams& c) {
        double sum = 0.0;
        for (const auto& p : pts) {
            const double r = cylinder_residual(c, p);
            sum += r * r;
        }
        return sum;
    };
    double cost = cost_of(apply_step(current, Vec5::Zero()));
    const double h = 1e-7;
    for (int iter = 0; iter < 30; ++iter) {
        Mat5 jtj = Mat5::Zero();
        Vec5 jtr = Vec5::Zero();
        std::array<CylinderParams, 5> perturbed;
        for (int k = 0; k < 5; ++k) {
            Vec5 s = Vec5::Zero();
            s[k] = h;
            perturbed[k] = apply_step(current, s);
        }
        const CylinderParams base = apply_step(current, Vec5::Zero());
        for (const auto& p : pts) {
            const double r0 = cylinder_residual(base, p);
            Vec5 j;
            for (int k = 0; k < 5; ++k) j[k] = (cylinder_residual(perturbed[k], p) - r0) / h;
            jtj += j * j.transpose();
            jtr += j * r0;
        }
        if (jtj.diagonal().minCoeff() <= 1e-18) return shape;
        bool improved = false;
        for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
            Mat5 damped = jtj;
            damped.diagonal() *= (1.0 + lambda);
            Eigen::LDLT<Mat5> ldlt(damped);
            if (ldlt.info() != Eigen::Success) return shape;
            const Vec5 step = ldlt.solve(-jtr);
            if (!step.allFinite()) return shape;
            const CylinderParams cand = apply_step(current, step);
            const double cand_cost = cost_of(cand);
            if (cand_cost <= cost) {
                const double gain = cost - cand_cost;
                ShapeModel next = ShapeModel::cylinder(cand.point, cand.axis, cand.radius, current.axis_x);
                current = next;
                cost = cand_cost;
                lambda = std::max(lambda * 0.3, 1e-9);
                improved = true;
                if (gain <= 1e-14 * std::max(cost, 1e-30) || step.norm() < 1e-12) iter = 30;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    if (!(current.radius > 0.0)) return shape;
    // Re-anchor: origin is the foot of the previous origin on the new axis.
    const Vec3 a = current.axis().dot(shape.axis()) < 0.0 ? Vec3(-current.axis()) : current.axis();
    const Vec3 origin = current.origin + (shape.origin - current.origin).dot(a) * a;
    return ShapeModel::cylinder(origin, a, current.radius, shape.axis_x);
}

/// Morton-ordered point index for localized sampling.
class SamplingOctree {
public:
    SamplingOctree(const OrientedPointCloud& cloud, int levels) : levels_(levels) {
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (const auto& p : cloud.positions) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double side = std::max((hi - lo).maxCoeff(), 1e-9) * (1.0 + 1e-9);
        codes_.resize(cloud.size());
        const double cells = static_cast<double>(1u << levels_);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Vec3 q = (cloud.positions[i] - lo) / side * cells;
            std::uint64_t code = 0;
            const auto ix = static_cast<std::uint32_t>(std::min(q.x(), cells - 1));
            const auto iy = static_cast<std::uint32_t>(std::min(q.y(), cells - 1));
            const auto iz = static_cast<std::uint32_t>(std::min(q.z(), cells - 1));
            for (int b = levels_ - 1; b >= 0; --b) {
                code = (code << 3) | (((ix >> b) & 1u) << 2) | (((iy >> b) & 1u) << 1) |
                       ((iz >> b) & 1u);
            }
            codes_[i] = code;
        }
        order_.resize(cloud.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(),
                         [&](std::size_t a, std::size_t b) { return codes_[a] < codes_[b]; });
    }

    /// Rebuild the list of available points in Morton order.
    void compact(const std::vector<std::uint8_t>& available) {
        live_.clear();
        live_codes_.clear();
        for (std::size_t idx : order_) {
            if (!available[idx]) continue;
            live_.push_back(idx);
            live_codes_.push_back(codes_[idx]);
        }
    }

    std::size_t live_size() const { return live_.size(); }
    std::size_t live(std::size_t k) const { return live_[k]; }

    /// Range [lo, hi) of live points sharing the cell of live point k at `level`.
    std::pair<std::size_t, std::size_t> cell_range(std::size_t k, int level) const {
        const int shift = 3 * (levels_ - level);
        const std::uint64_t prefix = live_codes_[k] >> shift;
        const std::uint64_t first = prefix << shift;
        const std::uint64_t last = first + ((std::uint64_t{1} << shift) - 1);
        const auto lo = std::lower_bound(live_codes_.begin(), live_codes_.end(), first);
        const auto hi = std::upper_bound(lo, live_codes_.end(), last);
        return {static_cast<std::size_t>(lo - live_codes_.begin()),
                static_cast<std::size_t>(hi - live_codes_.begin())};
    }

    int levels() const { return levels_; }

private:
    int levels_;
    std::vector<std::uint64_t> codes_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> live_;
    std::vector<std::uint64_t> live_codes_;
};

struct Candidate {
    ShapeModel shape;
    double score = 0.0;  // extrapolated inlier count
};

}  // namespace

double InlierCriteria::distance_threshold(double z) const {
    if (!modulate_by_noise || !(z > 0.0)) return dist_epsilon;
    return std::max(dist_epsilon, noise_factor * noise.sigma(z));
}

double InlierCriteria::cos_normal_threshold() const { return std::cos(normal_epsilon); }

bool InlierCriteria::accepts(const ShapeModel& shape, const Vec3& p, const Vec3& n, double z) const {
    if (std::abs(shape.signed_distance(p)) >= distance_threshold(z)) return false;
    return std::abs(n.dot(shape.normal_at(p))) >= cos_normal_threshold();
}

void DetectionParams::validate() const {
    if (!(inlier.dist_epsilon > 0.0)) throw std::invalid_argument("dist_epsilon must be positive");
    if (!(success_probability > 0.0 && success_probability < 1.0))
        throw std::invalid_argument("success_probability must lie in (0, 1)");
    if (octree_levels < 1 || octree_levels > 20)
        throw std::invalid_argument("octree_levels must lie in [1, 20]");
    if (subset_count == 0) throw std::invalid_argument("subset_count must be positive");
}

std::optional<ShapeModel> fit_minimal(ShapeKind kind, std::span<const Vec3> points,
                                      std::span<const Vec3> normals) {
    switch (kind) {
        case ShapeKind::Plane: {
            if (points.size() < 3) return std::nullopt;
            const Vec3 e1 = points[1] - points[0];
            const Vec3 e2 = points[2] - points[0];
            Vec3 n = e1.cross(e2);
            const double scale = std::max(e1.squaredNorm(), e2.squaredNorm());
            if (!(scale > 0.0) || n.norm() <= 1e-9 * scale) return std::nullopt;
            n.normalize();
            if (!normals.empty()) {
                Vec3 avg = Vec3::Zero();
                for (const auto& m : normals) avg += m;
                if (avg.dot(n) < 0.0) n = -n;
            }
            const Vec3 x = e1.normalized();
            return ShapeModel::plane(points[0], x, n.cross(x));
        }
        case ShapeKind::Sphere: {
            if (points.size() < 2 || normals.size() < 2) return std::nullopt;
            const Vec3& p1 = points[0];
            const Vec3& p2 = points[1];
            const Vec3 n1 = normals[0].normalized();
            const Vec3 n2 = normals[1].normalized();
            const Vec3 w0 = p1 - p2;
            const double gap = w0.norm();
            if (!(gap > 0.0)) return std::nullopt;
            Vec3 center;
            Vec3 c1, c2;
            if (closest_points(p1, n1, p2, n2, c1, c2)) {
                center = 0.5 * (c1 + c2);
            } else if (n1.dot(n2) < 0.0 && n1.cross(w0).norm() <= 1e-9 * gap) {
                // Opposite normals on one line: antipodal pair.
                center = 0.5 * (p1 + p2);
            } else {
                return std::nullopt;
            }
            const double r = 0.5 * ((p1 - center).norm() + (p2 - center).norm());
            if (!(r > 0.0) || !std::isfinite(r)) return std::nullopt;
            return ShapeModel::sphere(center, r);
        }
        case ShapeKind::Cylinder: {
            if (points.size() < 2 || normals.size() < 2) return std::nullopt;
            const Vec3 n1 = normals[0].normalized();
            const Vec3 n2 = normals[1].normalized();
            Vec3 axis = n1.cross(n2);
            if (axis.norm() < 1e-3) return std::nullopt;
            axis.normalize();
            const Vec3 q1 = points[0];
            const Vec3 q2 = points[1] - (points[1] - points[0]).dot(axis) * axis;
            const Vec3 m1 = orthogonal_part(n1, axis).normalized();
            const Vec3 m2 = orthogonal_part(n2, axis).normalized();
            Vec3 c1, c2;
            if (!closest_points(q1, m1, q2, m2, c1, c2)) return std::nullopt;
            const Vec3 center = 0.5 * (c1 + c2);
            const double r = 0.5 * ((q1 - center).norm() + (q2 - center).norm());
            if (!(r > 0.0) || !std::isfinite(r)) return std::nullopt;
            return ShapeModel::cylinder(center, axis, r);
        }
    }
    return std::nullopt;
}

double mean_abs_distance(const ShapeModel& shape, std::span<const Vec3> points) {
    if (points.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : points) sum += std::abs(shape.signed_distance(p));
    return sum / static_cast<double>(points.size());
}

ShapeModel refit(const ShapeModel& shape, std::span<const Vec3> inliers) {
    const std::size_t minimal = shape.kind == ShapeKind::Plane ? 3 : (shape.kind == ShapeKind::Sphere ? 4 : 5);
    if (inliers.size() < minimal) return shape;
    ShapeModel out;
    switch (shape.kind) {
        case ShapeKind::Plane: out = plane_refit(shape, inliers); break;
        case ShapeKind::Sphere: out = sphere_refit(shape, inliers); break;
        case ShapeKind::Cylinder: out = cylinder_refit(shape, inliers); break;
    }
    if (mean_abs_distance(out, inliers) > mean_abs_distance(shape, inliers)) return shape;
    return out;
}

std::vector<DetectedShape> detect_shapes(const OrientedPointCloud& cloud,
                                         const DetectionParams& params) {
    params.validate();
    std::vector<DetectedShape> result;
    const std::size_t total = cloud.size();
    if (total < kSampleSize) return result;

    const std::size_t min_inliers =
        params.min_inliers > 0
            ? params.min_inliers
            : std::max<std::size_t>(kSampleSize,
                                    static_cast<std::size_t>(std::ceil(params.min_inlier_fraction * total)));
    const auto& crit = params.inlier;
    const double cos_eps = crit.cos_normal_threshold();

    std::mt19937_64 rng(params.seed);
    std::vector<std::uint8_t> available(total, 1);
    std::size_t remaining = total;

    // Scoring subsets: a small first tier and the full subset.
    std::vector<std::size_t> subset(total);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
    std::shuffle(subset.begin(), subset.end(), rng);
    subset.resize(std::min(params.subset_count, total));
    const std::size_t tier1 = std::min<std::size_t>(subset.size(), std::max<std::size_t>(64, subset.size() / 8));

    std::vector<double> thresholds(total);
    for (std::size_t i = 0; i < total; ++i)
        thresholds[i] = crit.distance_threshold(cloud.positions[i].z());

    auto is_inlier = [&](const ShapeModel& s, std::size_t i) {
        const Vec3& p = cloud.positions[i];
        if (std::abs(s.signed_distance(p)) >= thresholds[i]) return false;
        return std::abs(cloud.normals[i].dot(s.normal_at(p))) >= cos_eps;
    };

    auto score_on = [&](const ShapeModel& s, std::size_t count_limit) -> double {
        std::size_t hits = 0, live = 0;
        for (std::size_t k = 0; k < count_limit; ++k) {
            const std::size_t i = subset[k];
            if (!available[i]) continue;
            ++live;
            if (is_inlier(s, i)) ++hits;
        }
        if (live == 0) return 0.0;
        return static_cast<double>(hits) * static_cast<double>(remaining) / static_cast<double>(live);
    };

    SamplingOctree octree(cloud, params.octree_levels);
    octree.compact(available);

    const int levels = octree.levels();
    std::vector<double> level_score(levels + 1, 1.0);
    auto pick_level = [&]() {
        double sum = 0.0;
        for (int l = 1; l <= levels; ++l) sum += level_score[l];
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double x = uni(rng);
        double acc = 0.0;
        for (int l = 1; l <= levels; ++l) {
            acc += 0.9 * level_score[l] / sum + 0.1 / levels;
            if (x <= acc) return l;
        }
        return levels;
    };

    // Probability of drawing a minimal set of a shape of n points among `remaining`.
    auto draw_probability = [&](double n) {
        return std::min(1.0, n / (static_cast<double>(remaining) * levels * 4.0));
    };
    const double miss_target = 1.0 - params.success_probability;

    auto validated = [&](const ShapeModel& s, const std::array<std::size_t, kSampleSize>& idx) {
        if (s.kind != ShapeKind::Plane && (s.radius < params.min_radius || s.radius > params.max_radius))
            return false;
        for (std::size_t i : idx)
            if (!is_inlier(s, i)) return false;
        return true;
    };

    std::size_t drawn_total = 0;
    std::size_t drawn_since = 0;
    std::optional<Candidate> best;
    int best_level = 0;

    while (remaining >= min_inliers && drawn_total < params.max_candidates) {
        for (int c = 0; c < params.candidates_per_round; ++c) {
            ++drawn_total;
            ++drawn_since;
            const std::size_t live_n = octree.live_size();
            if (live_n < kSampleSize) break;
            std::uniform_int_distribution<std::size_t> pick(0, live_n - 1);
            const std::size_t k0 = pick(rng);
            int level = pick_level();
            auto [lo, hi] = octree.cell_range(k0, level);
            while (hi - lo < kSampleSize && level > 1) {
                --level;
                std::tie(lo, hi) = octree.cell_range(k0, level);
            }
            if (hi - lo < kSampleSize) continue;
            std::uniform_int_distribution<std::size_t> in_cell(lo, hi - 1);
            std::array<std::size_t, kSampleSize> idx{octree.live(k0), 0, 0};
            std::size_t k1 = in_cell(rng), k2 = in_cell(rng);
            int guard = 0;
            while ((k1 == k0) && guard++ < 16) k1 = in_cell(rng);
            while ((k2 == k0 || k2 == k1) && guard++ < 32) k2 = in_cell(rng);
            if (k1 == k0 || k2 == k0 || k2 == k1) continue;
            idx[1] = octree.live(k1);
            idx[2] = octree.live(k2);

            const std::array<Vec3, 3> pts{cloud.positions[idx[0]], cloud.positions[idx[1]],
                                          cloud.positions[idx[2]]};
            const std::array<Vec3, 3> nrm{cloud.normals[idx[0]], cloud.normals[idx[1]],
                                          cloud.normals[idx[2]]};

            std::array<std::optional<ShapeModel>, 3> shapes;
            if (params.planes) shapes[0] = fit_minimal(ShapeKind::Plane, pts, nrm);
            if (params.spheres) shapes[1] = fit_minimal(ShapeKind::Sphere, pts, nrm);
            if (params.cylinders) shapes[2] = fit_minimal(ShapeKind::Cylinder, pts, nrm);

            for (auto& s : shapes) {
                if (!s || !validated(*s, idx)) continue;
                double score = score_on(*s, tier1);
                const double best_score = best ? best->score : 0.0;
                // Promote to the full subset only if the coarse estimate is competitive.
                const double scale = tier1 > 0 ? static_cast<double>(remaining) / tier1 : 1.0;
                const double upper = score + 3.0 * std::sqrt(std::max(score * scale, 1.0)) + scale;
                if (upper < best_score || upper < 0.5 * min_inliers) continue;
                if (subset.size() > tier1) score = score_on(*s, subset.size());
                if (!best || score > best->score) {
                    best = Candidate{*s, score};
                    best_level = level;
                }
            }
        }

        const double min_miss = std::pow(1.0 - draw_probability(static_cast<double>(min_inliers)),
                                         static_cast<double>(drawn_since));
        if (best && best->score >= min_inliers) {
            const double miss = std::pow(1.0 - draw_probability(best->score),
                                         static_cast<double>(drawn_since));
            if (miss >= miss_target) continue;

            // Extract: full inlier set, least-squares refit, recount.
            std::vector<std::size_t> inl;
            for (std::size_t i = 0; i < total; ++i)
                if (available[i] && is_inlier(best->shape, i)) inl.push_back(i);
            ShapeModel shape = best->shape;
            if (inl.size() >= kSampleSize) {
                std::vector<Vec3> pts;
                const std::size_t stride = std::max<std::size_t>(1, inl.size() / 20000);
                for (std::size_t k = 0; k < inl.size(); k += stride) pts.push_back(cloud.positions[inl[k]]);
                shape = refit(shape, pts);
                std::vector<std::size_t> refined;
                for (std::size_t i = 0; i < total; ++i)
                    if (available[i] && is_inlier(shape, i)) refined.push_back(i);
                // The least-squares shape wins unless it loses a noticeable share of the support.
                if (20 * refined.size() >= 19 * inl.size()) inl = std::move(refined);
                else shape = best->shape;
            }
            const bool radius_ok = shape.kind == ShapeKind::Plane ||
                                   (shape.radius >= params.min_radius && shape.radius <= params.max_radius);
            if (inl.size() >= min_inliers && radius_ok) {
                for (std::size_t i : inl) available[i] = 0;
                remaining -= inl.size();
                level_score[best_level] += 1.0;
                result.push_back({shape, std::move(inl)});
                octree.compact(available);
            }
            best.reset();
            drawn_since = 0;
            continue;
        }
        if (min_miss < miss_target) break;
    }
    return result;
}

}  // namespace shapeproxy
