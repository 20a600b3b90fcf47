#include "shapeproxy/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace shapeproxy {

namespace {

Vec3 orthogonal_part(const Vec3& v, const Vec3& axis) { return v - v.dot(axis) * axis; }

std::size_t minimal_refit_size(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Plane: return 3;
        case ShapeKind::Sphere: return 4;
        case ShapeKind::Cylinder: return 5;
    }
    return 5;
}

/// Least-squares refit followed by one trimmed pass that drops samples further
/// than noise_factor * sigma(z) from the first estimate.
ShapeModel trimmed_refit(const ShapeModel& shape, const WorldSamples& samples,
                         std::span<const std::size_t> idx, const ProxyParams& params) {
    const std::size_t stride = std::max<std::size_t>(1, idx.size() / std::max<std::size_t>(params.refit_samples, 1));
    std::vector<std::size_t> picked;
    for (std::size_t k = 0; k < idx.size(); k += stride) picked.push_back(idx[k]);
    if (picked.size() < minimal_refit_size(shape.kind)) return shape;

    std::vector<Vec3> pts;
    pts.reserve(picked.size());
    for (std::size_t i : picked) pts.push_back(samples.positions[i]);
    const ShapeModel first = refit(shape, pts);

    std::vector<Vec3> kept;
    kept.reserve(pts.size());
    for (std::size_t k = 0; k < picked.size(); ++k) {
        const double limit = params.inlier.noise_factor * params.inlier.noise.sigma(samples.depths[picked[k]]);
        if (std::abs(first.signed_distance(pts[k])) < limit) kept.push_back(pts[k]);
    }
    if (kept.size() < minimal_refit_size(shape.kind) || kept.size() == pts.size()) return first;
    return refit(first, kept);
}

Vec3 footpoint_of_origin(const Vec3& point, const Vec3& axis) { return point - point.dot(axis) * axis; }

}  // namespace

void ParamStats::add(const Eigen::VectorXd& x) {
    if (count == 0) {
        mean = Eigen::VectorXd::Zero(x.size());
        m2 = Eigen::VectorXd::Zero(x.size());
    }
    ++count;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
}

void ParamStats::combine(const ParamStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const Eigen::VectorXd delta = other.mean - mean;
    mean += delta * (nb / n);
    m2 += other.m2 + delta.cwiseProduct(delta) * (na * nb / n);
    count += other.count;
}

Eigen::VectorXd ParamStats::variance() const {
    if (count < 2) return Eigen::VectorXd::Zero(mean.size());
    return m2 / static_cast<double>(count - 1);
}

Eigen::VectorXd shape_params(const ShapeModel& shape) {
    switch (shape.kind) {
        case ShapeKind::Plane: {
            const Vec3 n = shape.axis();
            Eigen::VectorXd p(4);
            p << n, n.dot(shape.origin);
            return p;
        }
        case ShapeKind::Cylinder: {
            const Vec3 a = shape.axis();
            Eigen::VectorXd p(7);
            p << a, footpoint_of_origin(shape.origin, a), shape.radius;
            return p;
        }
        case ShapeKind::Sphere: {
            Eigen::VectorXd p(4);
            p << shape.origin, shape.radius;
            return p;
        }
    }
    return {};
}

ShapeModel shape_from_params(const Eigen::VectorXd& params, const ShapeModel& reference) {
    switch (reference.kind) {
        case ShapeKind::Plane: {
            const Vec3 raw = params.head<3>();
            const Vec3 n = raw.normalized();
            const double l = params[3] / raw.norm();
            Vec3 x = orthogonal_part(reference.axis_x, n);
            if (x.norm() < 1e-6) x = n.unitOrthogonal();
            x.normalize();
            return ShapeModel::plane(l * n, x, n.cross(x));
        }
        case ShapeKind::Cylinder: {
            const Vec3 a = Vec3(params.head<3>()).normalized();
            const Vec3 foot = params.segment<3>(3);
            return ShapeModel::cylinder(footpoint_of_origin(foot, a), a, params[6], reference.axis_x);
        }
        case ShapeKind::Sphere:
            return ShapeModel::sphere(params.head<3>(), params[3], reference.axis_x, reference.axis_y);
    }
    return reference;
}

std::size_t Proxy::emitting_cells() const {
    std::size_t n = 0;
    for (const auto& [key, cell] : cells)
        if (cell.emitting()) ++n;
    return n;
}

const Proxy* SceneState::find(std::uint32_t id) const {
    for (const auto& p : proxies)
        if (p.id == id) return &p;
    return nullptr;
}

Proxy* SceneState::find(std::uint32_t id) {
    for (auto& p : proxies)
        if (p.id == id) return &p;
    return nullptr;
}

WorldSamples WorldSamples::from_cloud(const OrientedPointCloud& cloud, const CameraPose& pose) {
    WorldSamples s;
    const std::size_t n = cloud.size();
    s.positions.resize(n);
    s.normals.resize(n);
    s.depths.resize(n);
    s.colors = cloud.colors;
    s.pixel_of = cloud.pixel_of;
    for (std::size_t i = 0; i < n; ++i) {
        s.positions[i] = pose.to_world(cloud.positions[i]);
        s.normals[i] = pose.direction_to_world(cloud.normals[i]);
        s.depths[i] = cloud.positions[i].z();
    }
    if (s.colors.size() != n) s.colors.assign(n, Rgb{});
    if (s.pixel_of.size() != n) s.pixel_of.assign(n, -1);
    return s;
}

WorldSamples WorldSamples::subset(std::span<const std::size_t> idx) const {
    WorldSamples s;
    for (std::size_t i : idx) {
        s.positions.push_back(positions[i]);
        s.normals.push_back(normals[i]);
        s.colors.push_back(colors[i]);
        s.depths.push_back(depths[i]);
        s.pixel_of.push_back(pixel_of[i]);
    }
    return s;
}

ManhattanAxes manhattan_from_planes(std::span<const DetectedShape> planes, const Vec3& up_hint) {
    ManhattanAxes out;
    const Vec3 up = up_hint.norm() > 0.0 ? Vec3(up_hint.normalized()) : Vec3::UnitZ();
    const double horizontal_cos = std::cos(20.0 * std::numbers::pi / 180.0);
    const double vertical_sin = std::sin(20.0 * std::numbers::pi / 180.0);

    Vec3 vertical_sum = Vec3::Zero();
    std::vector<std::pair<Vec3, double>> walls;
    for (const auto& d : planes) {
        if (d.shape.kind != ShapeKind::Plane) continue;
        const Vec3 n = d.shape.axis();
        const double c = n.dot(up);
        const double w = static_cast<double>(std::max<std::size_t>(d.inliers.size(), 1));
        if (std::abs(c) >= horizontal_cos) vertical_sum += (c >= 0.0 ? 1.0 : -1.0) * w * n;
        else if (std::abs(c) <= vertical_sin) walls.emplace_back(n, w);
    }
    const bool found = vertical_sum.norm() > 0.0 || !walls.empty();

    const Vec3 vertical = vertical_sum.norm() > 0.0 ? Vec3(vertical_sum.normalized()) : up;
    Vec3 e1 = orthogonal_part(Vec3::UnitX(), vertical);
    if (e1.norm() < 1e-3) e1 = orthogonal_part(Vec3::UnitY(), vertical);
    e1.normalize();
    const Vec3 e2 = vertical.cross(e1);

    Vec3 h1 = e1;
    if (!walls.empty()) {
        // Wall normals are folded modulo 90 deg before averaging.
        double cs = 0.0, sn = 0.0;
        for (const auto& [n, w] : walls) {
            const Vec3 h = orthogonal_part(n, vertical);
            if (h.norm() < 1e-9) continue;
            const double theta = std::atan2(h.dot(e2), h.dot(e1));
            cs += w * std::cos(4.0 * theta);
            sn += w * std::sin(4.0 * theta);
        }
        const double theta = 0.25 * std::atan2(sn, cs);
        h1 = std::cos(theta) * e1 + std::sin(theta) * e2;
    }
    out.axes.col(0) = h1;
    out.axes.col(1) = vertical.cross(h1);
    out.axes.col(2) = vertical;
    out.fallback = !found;
    return out;
}

ManhattanAxes init_manhattan(std::span<const OrientedPointCloud> world_clouds, const Vec3& up_hint,
                             const DetectionParams& detection) {
    DetectionParams params = detection;
    params.cylinders = false;
    params.spheres = false;
    params.inlier.modulate_by_noise = false;  // world z is not a viewing depth
    std::vector<DetectedShape> planes;
    for (const auto& cloud : world_clouds) {
        if (cloud.size() < 3) continue;
        auto found = detect_shapes(cloud, params);
        planes.insert(planes.end(), found.begin(), found.end());
    }
    return manhattan_from_planes(planes, up_hint);
}

TrackResult track(const SceneState& state, const WorldSamples& samples, const ProxyParams& params) {
    TrackResult result;
    const std::size_t n = samples.size();
    const std::size_t m = state.proxies.size();
    result.owner.assign(n, -1);
    result.votes.assign(m, 0);
    result.supported.assign(m, false);
    if (m == 0) return result;

    const auto& crit = params.inlier;
    const double cos_eps = crit.cos_normal_threshold();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const Vec3& p = samples.positions[i];
        const Vec3& nrm = samples.normals[i];
        const double eps = crit.distance_threshold(samples.depths[i]);
        for (std::size_t k = 0; k < m; ++k) {
            const ShapeModel& s = state.proxies[k].shape;
            if (std::abs(s.signed_distance(p)) >= eps) continue;
            if (std::abs(nrm.dot(s.normal_at(p))) < cos_eps) continue;
            result.owner[i] = static_cast<int>(k);
            break;
        }
    }
    for (int o : result.owner)
        if (o >= 0) ++result.votes[o];
    for (std::size_t k = 0; k < m; ++k)
        result.supported[k] = result.votes[k] >= static_cast<std::size_t>(std::max(params.keep_threshold, 0));
    return result;
}

std::vector<CellKey> accumulate(Proxy& proxy, const WorldSamples& samples,
                                std::span<const std::size_t> idx, const Vec3& camera_origin,
                                const CameraIntrinsics& intrinsics, const ProxyParams& params,
                                int frame_index) {
    std::vector<CellKey> touched;
    const double sigma = std::max(params.slh_min_sigma, params.inlier.noise.sigma(proxy.view_distance));
    const int side = proxy.spec.color_side();
    auto grid_of = [&proxy](const CellKey& key) -> ColorGrid* {
        auto it = proxy.cells.find(key);
        return it == proxy.cells.end() ? nullptr : &it->second.colors;
    };
    for (std::size_t i : idx) {
        const Vec3& p = samples.positions[i];
        const auto q = project_along_ray(proxy.shape, camera_origin, p);
        if (!q) continue;
        if (proxy.shape.kind == ShapeKind::Sphere && (*q - proxy.shape.origin).norm() == 0.0) continue;
        const Vec2 uv = parameterize(proxy.shape, *q);
        const CellKey key = proxy.spec.cell_of(uv.x(), uv.y());
        proxy.spec.include(key);
        auto [it, inserted] = proxy.cells.try_emplace(key);
        Cell& cell = it->second;
        if (inserted) {
            cell.colors = ColorGrid(side);
            cell.hist.merge_width = params.slh_merge_width;
        }
        if (!cell.hist.insert(proxy.shape.signed_distance(p), sigma)) continue;
        if (cell.last_frame_visited != frame_index) {
            cell.last_frame_visited = frame_index;
            touched.push_back(key);
        }
        const int n = color_neighborhood(samples.depths[i], proxy.spec, intrinsics).n;
        color_update(grid_of, proxy.spec, uv.x(), uv.y(), samples.colors[i], n, params.color_alpha);
    }
    for (const auto& key : touched) proxy.cells[key].hist.update_modes();
    return touched;
}

void update_proxy(Proxy& proxy, const WorldSamples& samples, std::span<const std::size_t> voters,
                  const CameraPose& pose, const SceneState& state, const ProxyParams& params,
                  int frame_index) {
    if (voters.empty()) return;
    const ShapeModel fitted = trimmed_refit(proxy.shape, samples, voters, params);
    Eigen::VectorXd x = shape_params(fitted);
    proxy.stats.add(x);
    proxy.shape = shape_from_params(proxy.stats.mean, proxy.shape);
    if (proxy.shape.kind != ShapeKind::Plane) {
        // Radius changes resize the fixed parameter domain.
        GridSpec fresh = GridSpec::for_shape(proxy.shape, proxy.spec.cell_size, proxy.spec.color_res_log2);
        proxy.spec.u_min = fresh.u_min;
        proxy.spec.u_max = fresh.u_max;
        proxy.spec.u_period = fresh.u_period;
        if (proxy.shape.kind == ShapeKind::Sphere) {
            proxy.spec.v_min = fresh.v_min;
            proxy.spec.v_max = fresh.v_max;
        }
    }

    double depth_sum = 0.0;
    for (std::size_t i : voters) depth_sum += samples.depths[i];
    const double frame_depth = depth_sum / static_cast<double>(voters.size());
    ++proxy.view_samples;
    proxy.view_distance += (frame_depth - proxy.view_distance) / static_cast<double>(proxy.view_samples);

    ++proxy.frames_seen;
    proxy.last_votes = static_cast<int>(voters.size());
    accumulate(proxy, samples, voters, pose.origin(), state.intrinsics, params, frame_index);
}

ShapeModel align_frame(const ShapeModel& shape, const ManhattanAxes& axes, const Vec3& camera_origin) {
    const Vec3 vertical = axes.vertical();
    switch (shape.kind) {
        case ShapeKind::Plane: {
            Vec3 n = shape.axis();
            if (n.dot(camera_origin - shape.origin) < 0.0) n = -n;
            Vec3 x, y;
            if (std::abs(n.dot(vertical)) < 0.5) {
                y = orthogonal_part(vertical, n).normalized();
                x = y.cross(n);
            } else {
                x = orthogonal_part(axes.h1(), n);
                if (x.norm() < 1e-3) x = orthogonal_part(axes.h2(), n);
                x.normalize();
                y = n.cross(x);
            }
            return ShapeModel::plane(n.dot(shape.origin) * n, x, y);
        }
        case ShapeKind::Cylinder: {
            Vec3 a = shape.axis();
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (std::abs(a.dot(axes.axes.col(k))) > std::abs(a.dot(axes.axes.col(best)))) best = k;
            if (a.dot(axes.axes.col(best)) < 0.0) a = -a;
            Vec3 hint = axes.axes.col((best + 1) % 3);
            return ShapeModel::cylinder(footpoint_of_origin(shape.origin, a), a, shape.radius, hint);
        }
        case ShapeKind::Sphere:
            return ShapeModel::sphere(shape.origin, shape.radius, axes.h1(), axes.h2());
    }
    return shape;
}

Proxy register_candidate(SceneState& state, const ShapeModel& shape, const WorldSamples& samples,
                         std::span<const std::size_t> inliers, const CameraPose& pose,
                         const ProxyParams& params) {
    Proxy proxy;
    proxy.id = state.next_id++;
    ShapeModel aligned = align_frame(shape, state.manhattan, pose.origin());
    aligned = trimmed_refit(aligned, samples, inliers, params);
    proxy.shape = aligned;
    proxy.spec = GridSpec::for_shape(aligned, params.cell_size, params.color_res_log2);
    proxy.stats.add(shape_params(aligned));
    proxy.frames_seen = 1;
    proxy.last_votes = static_cast<int>(inliers.size());
    if (!inliers.empty()) {
        double sum = 0.0;
        for (std::size_t i : inliers) sum += samples.depths[i];
        proxy.view_distance = sum / static_cast<double>(inliers.size());
        proxy.view_samples = 1;
    }
    accumulate(proxy, samples, inliers, pose.origin(), state.intrinsics, params, state.frame_index);
    return proxy;
}

bool cell_in_view(const Proxy& proxy, const CellKey& key, const RgbdFrame& frame, double margin) {
    const Vec2 uv = proxy.spec.cell_center(key);
    SurfacePoint sp;
    try {
        sp = unparameterize(proxy.shape, uv.x(), uv.y());
    } catch (const std::domain_error&) {
        return false;
    }
    const Vec3 pc = frame.pose.to_camera(sp.point);
    const auto px = frame.intrinsics.project_to_pixel(pc);
    if (!px) return false;
    if (sp.normal.dot(frame.pose.origin() - sp.point) <= 0.0) return false;
    const double d = frame.depth(px->first, px->second);
    if (d > 0.0 && d < pc.z() - margin) return false;
    return true;
}

void update_visits(Proxy& proxy, const RgbdFrame& frame, const ProxyParams& params, int frame_index) {
    for (auto& [key, cell] : proxy.cells) {
        if (cell.last_frame_visited == frame_index) {
            cell.visit.push(true, params.visit_threshold);
        } else if (cell_in_view(proxy, key, frame, params.occlusion_margin)) {
            cell.visit.push(false, params.visit_threshold);
        }
    }
}

void lifecycle_step(SceneState& state, const std::vector<bool>& supported, const ProxyParams& params) {
    std::vector<Proxy> kept;
    kept.reserve(state.proxies.size());
    for (std::size_t k = 0; k < state.proxies.size(); ++k) {
        Proxy& p = state.proxies[k];
        const bool ok = k < supported.size() && supported[k];
        if (ok) {
            p.status = ProxyStatus::Active;
            p.frames_since_support = 0;
        } else if (p.status == ProxyStatus::Active) {
            p.status = ProxyStatus::Probation;
            p.frames_since_support = 1;
        } else {
            ++p.frames_since_support;
        }
        const bool purge = p.status == ProxyStatus::Probation &&
                           p.frames_since_support > params.purge_after &&
                           p.frames_seen < params.veteran_after;
        if (!purge) kept.push_back(std::move(p));
    }
    state.proxies = std::move(kept);
}

UvBounds cell_bounds_in(const Proxy& proxy, const ShapeModel& frame) {
    UvBounds b;
    const GridSpec& s = proxy.spec;
    if (s.u_max <= s.u_min || s.v_max <= s.v_min) return b;
    std::vector<Vec2> corners;
    if (proxy.shape.kind == ShapeKind::Plane) {
        corners = {{s.u_min, s.v_min}, {s.u_max, s.v_min}, {s.u_min, s.v_max}, {s.u_max, s.v_max}};
    } else if (proxy.shape.kind == ShapeKind::Cylinder) {
        corners = {{0.0, s.v_min}, {0.0, s.v_max}};
    } else {
        corners = {{0.0, 0.0}};
    }
    for (const auto& c : corners) {
        Vec3 p;
        if (proxy.shape.kind == ShapeKind::Plane) p = unparameterize(proxy.shape, c.x(), c.y()).point;
        else if (proxy.shape.kind == ShapeKind::Cylinder) p = proxy.shape.origin + c.y() * proxy.shape.axis();
        else p = proxy.shape.origin;
        Vec2 uv;
        if (frame.kind == ShapeKind::Plane) uv = parameterize(frame, p);
        else if (frame.kind == ShapeKind::Cylinder) uv = {0.0, (p - frame.origin).dot(frame.axis())};
        else uv = {0.0, 0.0};
        if (b.empty) {
            b = {uv.x(), uv.x(), uv.y(), uv.y(), false};
        } else {
            b.u0 = std::min(b.u0, uv.x());
            b.u1 = std::max(b.u1, uv.x());
            b.v0 = std::min(b.v0, uv.y());
            b.v1 = std::max(b.v1, uv.y());
        }
    }
    return b;
}

bool similar(const Proxy& a, const Proxy& b, const ProxyParams& params) {
    if (a.shape.kind != b.shape.kind) return false;
    const double cos_limit = std::cos(params.merge_angle);
    auto overlap = [&](const UvBounds& x, const UvBounds& y, bool use_u) {
        if (x.empty || y.empty) return false;
        const double m = params.merge_bounds_margin;
        const bool v_ok = x.v0 <= y.v1 + m && y.v0 <= x.v1 + m;
        const bool u_ok = !use_u || (x.u0 <= y.u1 + m && y.u0 <= x.u1 + m);
        return u_ok && v_ok;
    };
    switch (a.shape.kind) {
        case ShapeKind::Plane: {
            if (std::abs(a.shape.axis().dot(b.shape.axis())) < cos_limit) return false;
            const UvBounds ba = cell_bounds_in(a, a.shape);
            const UvBounds bb = cell_bounds_in(b, a.shape);
            if (!overlap(ba, bb, true)) return false;
            const GridSpec& sa = a.spec;
            const GridSpec& sb = b.spec;
            const Vec3 ca = unparameterize(a.shape, 0.5 * (sa.u_min + sa.u_max), 0.5 * (sa.v_min + sa.v_max)).point;
            const Vec3 cb = unparameterize(b.shape, 0.5 * (sb.u_min + sb.u_max), 0.5 * (sb.v_min + sb.v_max)).point;
            const double offset = std::max(std::abs(a.shape.signed_distance(cb)), std::abs(b.shape.signed_distance(ca)));
            return offset < params.merge_offset;
        }
        case ShapeKind::Cylinder: {
            if (std::abs(a.shape.axis().dot(b.shape.axis())) < cos_limit) return false;
            if (std::abs(a.shape.radius - b.shape.radius) >= params.merge_radius) return false;
            const Vec3 aa = a.shape.axis();
            const Vec3 ab = b.shape.axis();
            const Vec3 ca = a.shape.origin + 0.5 * (a.spec.v_min + a.spec.v_max) * aa;
            const Vec3 cb = b.shape.origin + 0.5 * (b.spec.v_min + b.spec.v_max) * ab;
            const double d1 = orthogonal_part(cb - a.shape.origin, aa).norm();
            const double d2 = orthogonal_part(ca - b.shape.origin, ab).norm();
            if (std::max(d1, d2) >= params.merge_offset) return false;
            return overlap(cell_bounds_in(a, a.shape), cell_bounds_in(b, a.shape), false);
        }
        case ShapeKind::Sphere:
            return (a.shape.origin - b.shape.origin).norm() < params.merge_offset &&
                   std::abs(a.shape.radius - b.shape.radius) < params.merge_radius;
    }
    return false;
}

void merge_into(Proxy& keeper, const Proxy& donor, const ProxyParams& params) {
    ParamStats incoming = donor.stats;
    if (incoming.count == 0) {
        incoming.add(shape_params(donor.shape));
    }
    const bool flip = keeper.shape.kind != ShapeKind::Sphere && keeper.shape.axis().dot(donor.shape.axis()) < 0.0;
    if (flip) {
        incoming.mean.head<3>() *= -1.0;
        if (keeper.shape.kind == ShapeKind::Plane) incoming.mean[3] *= -1.0;
    }
    ParamStats weighted_keeper = keeper.stats;
    if (weighted_keeper.count == 0) weighted_keeper.add(shape_params(keeper.shape));
    // Weight each side by the frames it was seen in.
    const long keep_count = weighted_keeper.count;
    const long donor_count = incoming.count;
    weighted_keeper.count = std::max<long>(keeper.frames_seen, 1);
    incoming.count = std::max<long>(donor.frames_seen, 1);
    weighted_keeper.combine(incoming);
    weighted_keeper.count = keep_count + donor_count;
    keeper.stats = weighted_keeper;
    keeper.shape = shape_from_params(keeper.stats.mean, keeper.shape);
    if (keeper.shape.kind != ShapeKind::Plane) {
        GridSpec fresh = GridSpec::for_shape(keeper.shape, keeper.spec.cell_size, keeper.spec.color_res_log2);
        keeper.spec.u_min = fresh.u_min;
        keeper.spec.u_max = fresh.u_max;
        keeper.spec.u_period = fresh.u_period;
        if (keeper.shape.kind == ShapeKind::Sphere) {
            keeper.spec.v_min = fresh.v_min;
            keeper.spec.v_max = fresh.v_max;
        }
    }

    // Deterministic order for re-keyed insertion.
    std::vector<const std::pair<const CellKey, Cell>*> donor_cells;
    donor_cells.reserve(donor.cells.size());
    for (const auto& entry : donor.cells) donor_cells.push_back(&entry);
    std::sort(donor_cells.begin(), donor_cells.end(),
              [](const auto* x, const auto* y) { return x->first < y->first; });

    for (const auto* entry : donor_cells) {
        const Vec2 uv = donor.spec.cell_center(entry->first);
        Vec3 p;
        try {
            p = unparameterize(donor.shape, uv.x(), uv.y()).point;
        } catch (const std::domain_error&) {
            continue;
        }
        if (keeper.shape.kind == ShapeKind::Sphere && (p - keeper.shape.origin).norm() == 0.0) continue;
        const Vec2 kuv = parameterize(keeper.shape, p);
        const CellKey key = keeper.spec.cell_of(kuv.x(), kuv.y());
        keeper.spec.include(key);
        auto [it, inserted] = keeper.cells.try_emplace(key, entry->second);
        if (inserted) continue;
        Cell& cell = it->second;
        const Cell& other = entry->second;
        cell.hist.absorb(other.hist);
        cell.colors.absorb(other.colors);
        cell.visit.absorb(other.visit);
        cell.filled = cell.filled || other.filled;
        cell.last_frame_visited = std::max(cell.last_frame_visited, other.last_frame_visited);
    }

    const double wk = static_cast<double>(keeper.view_samples);
    const double wd = static_cast<double>(donor.view_samples);
    if (wk + wd > 0.0) keeper.view_distance = (keeper.view_distance * wk + donor.view_distance * wd) / (wk + wd);
    keeper.view_samples += donor.view_samples;
    keeper.frames_seen = std::max(keeper.frames_seen, donor.frames_seen);
    keeper.frames_since_support = std::min(keeper.frames_since_support, donor.frames_since_support);
    if (donor.status == ProxyStatus::Active) keeper.status = ProxyStatus::Active;
    keeper.last_votes += donor.last_votes;
    (void)params;
}

int merge_similar(SceneState& state, const ProxyParams& params) {
    std::sort(state.proxies.begin(), state.proxies.end(),
              [](const Proxy& a, const Proxy& b) { return a.id < b.id; });
    int merges = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < state.proxies.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < state.proxies.size(); ++j) {
                if (!similar(state.proxies[i], state.proxies[j], params)) continue;
                merge_into(state.proxies[i], state.proxies[j], params);
                state.proxies.erase(state.proxies.begin() + static_cast<std::ptrdiff_t>(j));
                ++merges;
                changed = true;
                break;
            }
        }
    }
    return merges;
}

}  // namespace shapeproxy
