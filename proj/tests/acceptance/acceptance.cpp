// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when a gating criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "shapeproxy/codec.hpp"
#include "shapeproxy/config.hpp"
#include "shapeproxy/mesh.hpp"
#include "shapeproxy/pipeline.hpp"
#include "shapeproxy/process.hpp"
#include "shapeproxy/synth.hpp"

using namespace shapeproxy;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

PipelineConfig seeded(std::uint64_t seed) {
    PipelineConfig c;
    c.seed = seed;
    c.threads = 1;
    return c;
}

SynthShape plane_shape(std::uint32_t id, const ShapeModel& s, double u0, double u1, double v0, double v1) {
    SynthShape out;
    out.id = id;
    out.shape = s;
    out.u_min = u0, out.u_max = u1, out.v_min = v0, out.v_max = v1;
    return out;
}

/// Wall y = 0 (u = x, v = z) seen head-on by a static camera.
SyntheticScene static_view(std::vector<SynthShape> shapes, const Vec3& eye, const Vec3& target, int frames) {
    SyntheticScene s;
    s.shapes = std::move(shapes);
    s.path.kind = CameraPath::Kind::Static;
    s.path.eye = eye;
    s.path.target = target;
    s.path.frames = frames;
    return s;
}

ShapeModel wall_model(double y = 0.0) { return ShapeModel::plane(Vec3(0, y, 0), Vec3::UnitX(), Vec3::UnitZ()); }

// 1. Pixel footprint at 8 m.
Outcome pixel_area() {
    const double a = CameraIntrinsics{}.pixel_area(8.0);
    return {std::abs(a - 0.00068539) <= 1e-8, fmt("a(8 m) = %.10f m^2 (target 0.00068539 +- 1e-8)", a)};
}

// 2. Parameterization round trips.
Outcome round_trips() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    auto unit = [&] { return Vec3(g(rng), g(rng), g(rng)).normalized(); };
    const int n = 100000;
    double worst[3] = {0, 0, 0};
    bool confined = true;

    const Vec3 a = unit();
    const ShapeModel plane = ShapeModel::plane(Vec3(0.4, -1.2, 2.0), a.unitOrthogonal(), a.cross(a.unitOrthogonal()));
    const ShapeModel cyl = ShapeModel::cylinder(Vec3(1, 2, -0.5), unit(), 0.3, Vec3::UnitX());
    const ShapeModel sph = ShapeModel::sphere(Vec3(-0.7, 0.1, 3.0), 0.5);
    std::uniform_real_distribution<double> uni(-5.0, 5.0), ang(0.0, 2 * kPi);
    for (int i = 0; i < n; ++i) {
        const Vec3 p = plane.origin + uni(rng) * plane.axis_x + uni(rng) * plane.axis_y;
        const Vec2 uv = parameterize(plane, p);
        worst[0] = std::max(worst[0], (unparameterize(plane, uv.x(), uv.y()).point - p).norm() / 1.0);

        const double t = ang(rng);
        const Vec3 q = cyl.origin + uni(rng) * cyl.axis() +
                       cyl.radius * (std::cos(t) * cyl.axis_x + std::sin(t) * cyl.axis_y);
        const Vec2 uvc = parameterize(cyl, q);
        worst[1] = std::max(worst[1], (unparameterize(cyl, uvc.x(), uvc.y()).point - q).norm() / 1.0);

        const Vec3 s = sph.origin + sph.radius * unit();
        const Vec2 uvs = parameterize(sph, s);
        const double lim = kPi * sph.radius / 2 + 1e-12;
        if (std::abs(uvs.x()) > lim || std::abs(uvs.y()) > lim) confined = false;
        worst[2] = std::max(worst[2], (unparameterize(sph, uvs.x(), uvs.y()).point - s).norm() / 1.0);
    }
    const double secs = seconds_since(t0);
    const bool ok = worst[0] < 1e-5 && worst[1] < 1e-5 && worst[2] < 1e-5 && confined && secs < 1.0;
    return {ok, fmt("max error plane %.2e, cylinder %.2e, sphere %.2e (limit 1e-5); sphere uv confined: %s; %.2f s",
                    worst[0], worst[1], worst[2], confined ? "yes" : "no", secs)};
}

// 3. Detection accuracy on the room scene over seeded runs.
Outcome detection_accuracy() {
    const int runs = 20;
    int good = 0;
    double worst_normal = 0, worst_radius = 0;
    std::string failures;
    for (int seed = 1; seed <= runs; ++seed) {
        const SyntheticScene room = room_scene(100, 0.002, static_cast<std::uint64_t>(seed));
        Pipeline p(seeded(static_cast<std::uint64_t>(seed)), room.intrinsics);
        for (int k = 0; k < room.frames(); ++k) p.process(render(room, k).frame);
        bool ok = true;
        for (const auto& r : evaluate(p.state(), room)) {
            if (!r.detected) {
                ok = false;
                continue;
            }
            if (r.kind == ShapeKind::Plane) {
                worst_normal = std::max(worst_normal, r.normal_error);
                ok = ok && r.normal_error < 0.5 * kDeg;
            } else {
                worst_radius = std::max(worst_radius, std::abs(r.radius_error));
                ok = ok && std::abs(r.radius_error) < 0.005;
            }
        }
        good += ok;
        if (!ok) failures += " " + std::to_string(seed);
    }
    return {good >= 18, fmt("%d/%d runs found all 5 shapes within tolerance (need 18); worst plane normal %.3f deg, "
                            "worst radius %.2f mm%s%s",
                            good, runs, worst_normal / kDeg, worst_radius * 1000,
                            failures.empty() ? "" : "; failing seeds:", failures.c_str())};
}

// 4. Per-cell running mean settles within 30 samples.
Outcome statistic_convergence() {
    SyntheticScene s = static_view({plane_shape(1, wall_model(), -3, 3, -1, 3)}, Vec3(0, -2, 1), Vec3(0, 0, 1), 20);
    s.noise.kind = SynthNoise::Kind::Axial;
    s.noise.seed = 4;
    ProxyParams params;
    SceneState state;
    state.intrinsics = s.intrinsics;

    const RgbdFrame first = render(s, 0).frame;
    const WorldSamples ws0 = WorldSamples::from_cloud(estimate_normals(first), first.pose);
    std::vector<std::size_t> all0(ws0.size());
    for (std::size_t i = 0; i < all0.size(); ++i) all0[i] = i;
    // True wall, oriented toward the camera by registration; cells rebuilt with hooks.
    Proxy proxy = register_candidate(state, s.shapes[0].shape, ws0, all0, first.pose, params);
    std::map<std::pair<int, int>, std::vector<double>> series;
    std::vector<CellKey> keys;
    for (const auto& [key, cell] : proxy.cells) keys.push_back(key);
    proxy.cells.clear();
    for (const auto& key : keys) {
        Cell c;
        c.colors = ColorGrid(proxy.spec.color_side());
        auto* out = &series[{key.i, key.j}];
        c.hist.on_insert = [out](double dc) { out->push_back(dc); };
        proxy.cells.emplace(key, std::move(c));
    }
    for (int k = 0; k < s.frames(); ++k) {
        const RgbdFrame f = render(s, k).frame;
        const WorldSamples ws = WorldSamples::from_cloud(estimate_normals(f), f.pose);
        std::vector<std::size_t> idx(ws.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        accumulate(proxy, ws, idx, f.pose.origin(), f.intrinsics, params, k + 1);
    }
    // Mean increment over cells at each sample count.
    const std::size_t horizon = 300;
    std::vector<double> sum(horizon + 1, 0.0);
    std::vector<int> count(horizon + 1, 0);
    for (const auto& [key, v] : series)
        for (std::size_t n = 1; n < std::min(v.size(), horizon + 1); ++n) {
            sum[n] += std::abs(v[n] - v[n - 1]);
            ++count[n];
        }
    int settled = -1;
    double after30 = 0;
    for (std::size_t n = 1; n <= horizon; ++n) {
        if (count[n] == 0) break;
        const double inc = sum[n] / count[n];
        if (n + 1 >= 30) after30 = std::max(after30, inc);
        if (inc < 0.0005 && settled < 0) settled = static_cast<int>(n + 1);
        if (inc >= 0.0005) settled = -1;
    }
    const bool ok = settled > 0 && settled <= 30 && after30 < 0.0005 && count[29] > 100;
    return {ok, fmt("%zu cells; mean increment below 0.5 mm from sample %d on; max mean increment after 30 samples "
                    "%.3f mm",
                    series.size(), settled, after30 * 1000)};
}

// 5. Proxy-based filtering of a wall with a raised 3 cm frame.
Outcome filter_behavior() {
    const double fu0 = -0.5, fu1 = 0.5, fv0 = 0.55, fv1 = 1.45;  // frame outer edge
    const double iu0 = -0.25, iu1 = 0.25, iv0 = 0.8, iv1 = 1.2;  // frame inner edge
    SynthShape wall = plane_shape(1, wall_model(), -3, 3, -1, 3);
    SynthShape frame = plane_shape(2, wall_model(-0.03), fu0, fu1, fv0, fv1);
    frame.holes.push_back({iu0, iu1, iv0, iv1});
    SyntheticScene s = static_view({wall, frame}, Vec3(0, -2, 1), Vec3(0, 0, 1), 40);
    SyntheticScene truth = s;
    s.noise.kind = SynthNoise::Kind::Axial;
    s.noise.seed = 9;

    PipelineConfig cfg = seeded(5);
    apply_setting(cfg, "dist_epsilon", "0.045");
    Pipeline p(cfg, s.intrinsics);
    FrameResult last;
    RgbdFrame raw;
    for (int k = 0; k < s.frames(); ++k) {
        raw = render(s, k).frame;
        last = p.process(raw);
    }
    const RenderedFrame gt = render(truth, s.frames() - 1);
    const RgbdFrame out = p.filter(raw, last.marks);

    auto inside = [](double u, double v, double u0, double u1, double v0, double v1, double m) {
        return u > u0 + m && u < u1 - m && v > v0 + m && v < v1 - m;
    };
    double flat_raw = 0, flat_out = 0, off_out = 0;
    std::size_t flat_n = 0, off_n = 0, bimodal_px = 0, bimodal_changed = 0;
    std::set<std::pair<int, int>> bimodal_cells;
    const Vec3 cam = raw.pose.origin();
    for (int r = 0; r < raw.depth.height(); ++r)
        for (int c = 0; c < raw.depth.width(); ++c) {
            const double zt = gt.frame.depth(r, c);
            if (!(zt > 0.0) || !(raw.depth(r, c) > 0.0)) continue;
            const Vec3 pt = gt.frame.pose.to_world(gt.frame.intrinsics.unproject(r, c, zt));
            const double u = pt.x(), v = pt.z();
            const bool near_frame = inside(u, v, fu0 - 0.1, fu1 + 0.1, fv0 - 0.1, fv1 + 0.1, 0.0);
            const bool in_band = gt.labels(r, c) == 2 && inside(u, v, fu0, fu1, fv0, fv1, 0.05) &&
                                 !inside(u, v, iu0, iu1, iv0, iv1, -0.05);
            if (gt.labels(r, c) == 1 && !near_frame) {
                flat_raw += (raw.depth(r, c) - zt) * (raw.depth(r, c) - zt);
                flat_out += (out.depth(r, c) - zt) * (out.depth(r, c) - zt);
                ++flat_n;
            } else if (in_band) {
                off_out += (out.depth(r, c) - zt) * (out.depth(r, c) - zt);
                ++off_n;
            }
            // Cell lookup exactly as the filter does it.
            const std::uint32_t id = last.marks(r, c);
            const Proxy* proxy = id ? p.state().find(id) : nullptr;
            if (!proxy) continue;
            const Vec3 pw = raw.pose.to_world(raw.intrinsics.unproject(r, c, raw.depth(r, c)));
            const auto q = project_along_ray(proxy->shape, cam, pw);
            if (!q) continue;
            const Vec2 uv = parameterize(proxy->shape, *q);
            const CellKey key = proxy->spec.cell_of(uv.x(), uv.y());
            auto it = proxy->cells.find(key);
            if (it == proxy->cells.end() || it->second.modes() < 2) continue;
            bimodal_cells.insert({key.i, key.j});
            ++bimodal_px;
            bimodal_changed += out.depth(r, c) != raw.depth(r, c);
        }
    const double rraw = std::sqrt(flat_raw / std::max<std::size_t>(flat_n, 1));
    const double rout = std::sqrt(flat_out / std::max<std::size_t>(flat_n, 1));
    const double roff = std::sqrt(off_out / std::max<std::size_t>(off_n, 1));
    const bool ok = flat_n > 1000 && off_n > 500 && rraw >= 3.0 * rout && roff <= 0.002 && bimodal_px > 0 &&
                    bimodal_changed == 0;
    return {ok, fmt("flat RMSE %.2f mm raw vs %.2f mm filtered (x%.1f, need 3); frame offset RMSE %.2f mm (limit 2); "
                    "%zu bimodal cells, %zu of %zu pixels changed",
                    rraw * 1000, rout * 1000, rraw / std::max(rout, 1e-12), roff * 1000, bimodal_cells.size(),
                    bimodal_changed, bimodal_px)};
}

// 6. Hole filling keeps large openings open.
Outcome hole_filling() {
    SynthShape wall = plane_shape(1, wall_model(), -2.0, 2.5, 0.0, 2.5);
    const std::array<double, 4> small{0.0, 0.25, 1.5, 1.75};
    const std::array<double, 4> large{-1.5, -1.0, 0.8, 1.3};
    const std::array<double, 4> door{1.0, 1.8, 0.0, 2.0};
    wall.holes = {small, large, door};
    SyntheticScene s = static_view({wall}, Vec3(0.25, -4.0, 1.25), Vec3(0.25, 0, 1.25), 30);
    s.noise.kind = SynthNoise::Kind::Constant;
    s.noise.sigma = 0.002;
    Pipeline p(seeded(6), s.intrinsics);
    for (int k = 0; k < s.frames(); ++k) p.process(render(s, k).frame);
    SceneState state = p.state();
    const Proxy* before = nullptr;
    for (const auto& px : state.proxies)
        if (px.shape.kind == ShapeKind::Plane && std::abs(px.shape.axis().y()) > 0.99) before = &px;
    if (!before) return {false, "wall proxy not found"};
    const std::uint32_t id = before->id;
    fill_holes(state, p.config().holes);
    const Proxy& wp = *state.find(id);

    // Cells whose square lies fully inside a hole, in world (x, z).
    auto cells_inside = [&](const std::array<double, 4>& h) {
        std::vector<CellKey> out;
        const double w = wp.spec.cell_size;
        for (int j = wp.spec.j_lo() - 2; j <= wp.spec.j_hi() + 2; ++j)
            for (int i = wp.spec.i_lo() - 2; i <= wp.spec.i_hi() + 2; ++i) {
                bool in = true;
                for (double a : {0.0, 1.0})
                    for (double b : {0.0, 1.0}) {
                        const Vec3 q = unparameterize(wp.shape, (i + a) * w, (j + b) * w).point;
                        in = in && q.x() >= h[0] - 1e-9 && q.x() <= h[1] + 1e-9 && q.z() >= h[2] - 1e-9 &&
                             q.z() <= h[3] + 1e-9;
                    }
                if (in) out.push_back({i, j});
            }
        return out;
    };
    auto emitting = [&](const std::vector<CellKey>& ks) {
        std::size_t n = 0;
        for (const auto& k : ks) {
            auto it = wp.cells.find(k);
            n += it != wp.cells.end() && it->second.emitting();
        }
        return n;
    };
    const auto ks = cells_inside(small), kl = cells_inside(large), kd = cells_inside(door);
    const std::size_t fs = emitting(ks), fl = emitting(kl), fd = emitting(kd);
    const bool ok = ks.size() >= 16 && fs == ks.size() && kl.size() >= 64 && fl == 0 && kd.size() >= 400 && fd == 0;
    return {ok, fmt("small hole %zu/%zu cells filled; 10x10 hole %zu/%zu filled; doorway %zu/%zu filled", fs,
                    ks.size(), fl, kl.size(), fd, kd.size())};
}

// 7. Codec fidelity on planar scenes and compression of a long room sequence.
Outcome codec() {
    const double sigma = 0.002;
    SyntheticScene planar = room_scene(40, sigma, 3);
    planar.shapes.erase(std::remove_if(planar.shapes.begin(), planar.shapes.end(),
                                       [](const SynthShape& s) { return s.shape.kind != ShapeKind::Plane; }),
                        planar.shapes.end());
    SyntheticScene truth = planar;
    truth.noise.kind = SynthNoise::Kind::None;
    Pipeline p(seeded(3), planar.intrinsics);
    for (int k = 0; k < planar.frames(); ++k) p.process(render(planar, k).frame);
    const SceneState decoded = decode(encode(p.state()));
    double sq = 0;
    std::size_t n = 0;
    for (int k = 0; k < planar.frames(); k += 5) {
        const RenderedFrame gt = render(truth, k);
        const Image<double> rec = decompress_frame(decoded, decoded.intrinsics, gt.frame.pose);
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (!(rec[i] > 0.0) || !(gt.frame.depth[i] > 0.0)) continue;
            sq += (rec[i] - gt.frame.depth[i]) * (rec[i] - gt.frame.depth[i]);
            ++n;
        }
    }
    const double rmse = std::sqrt(sq / std::max<std::size_t>(n, 1));

    const SyntheticScene room = room_scene(300, sigma, 1);
    Pipeline q(seeded(1), room.intrinsics);
    for (int k = 0; k < room.frames(); ++k) q.process(render(room, k).frame);
    const auto bytes = encode(q.state());
    const double ratio = scene_ratio(static_cast<std::size_t>(room.frames()), bytes.size());
    const bool ok = n > 0 && rmse <= sigma && ratio > 100.0;
    return {ok, fmt("planar decompressed RMSE %.3f mm over %zu pixels (limit %.1f mm); 300-frame room archive %zu B, "
                    "scene ratio %.1f (need > 100)",
                    rmse * 1000, n, sigma * 1000, bytes.size(), ratio)};
}

Cell activated_cell(int side) {
    Cell c;
    c.colors = ColorGrid(side);
    for (int i = 0; i < 30; ++i) c.hist.insert(0.0, 0.003);
    c.hist.update_modes();
    for (int i = 0; i < 25; ++i) c.visit.push(true);
    return c;
}

Proxy full(const ShapeModel& shape, double v0, double v1) {
    Proxy p;
    p.id = 1;
    p.shape = shape;
    p.spec = GridSpec::for_shape(shape);
    if (shape.kind == ShapeKind::Cylinder) p.spec.v_min = v0, p.spec.v_max = v1;
    for (int j = p.spec.j_lo(); j <= p.spec.j_hi(); ++j)
        for (int i = p.spec.i_lo(); i <= p.spec.i_hi(); ++i) p.cells[{i, j}] = activated_cell(p.spec.color_side());
    return p;
}

// 8. Mesh topology.
Outcome mesh_topology() {
    const Proxy cyl = full(ShapeModel::cylinder(Vec3::Zero(), Vec3::UnitZ(), 0.3), 0.0, 1.0);
    const Mesh cm = mesh_proxy(cyl).mesh;
    // Boundary edges that are not on the two end rings lie on the seam.
    std::map<std::pair<int, int>, int> uses;
    for (const auto& f : cm.faces)
        for (std::size_t k = 0; k < f.v.size(); ++k) {
            int a = f.v[k], b = f.v[(k + 1) % f.v.size()];
            if (a > b) std::swap(a, b);
            ++uses[{a, b}];
        }
    std::size_t seam = 0;
    for (const auto& [e, n] : uses) {
        if (n != 1) continue;
        const double za = cm.vertices[e.first].z(), zb = cm.vertices[e.second].z();
        const bool ring = (std::abs(za) < 1e-9 && std::abs(zb) < 1e-9) ||
                          (std::abs(za - 1.0) < 1e-9 && std::abs(zb - 1.0) < 1e-9);
        seam += !ring;
    }

    const Mesh sm = mesh_proxy(full(ShapeModel::sphere(Vec3(0, 0, 1), 0.5), 0, 0)).mesh;

    Proxy l;
    l.id = 2;
    l.shape = wall_model();
    l.spec = GridSpec::for_shape(l.shape);
    for (const CellKey k : {CellKey{0, 0}, CellKey{1, 0}, CellKey{0, 1}}) {
        l.spec.include(k);
        l.cells[k] = activated_cell(l.spec.color_side());
    }
    const Mesh lm = mesh_proxy(l).mesh;
    const bool ok = seam == 0 && sm.boundary_edges() == 0 && sm.euler_characteristic() == 2 &&
                    lm.triangle_count() == 1 && lm.quad_count() == 3;
    return {ok, fmt("cylinder seam boundary edges %zu; sphere boundary edges %zu, Euler %ld; L-junction %zu quads + "
                    "%zu triangles",
                    seam, sm.boundary_edges(), sm.euler_characteristic(), lm.quad_count(), lm.triangle_count())};
}

// 9. Seeded single-thread runs produce identical archives.
Outcome determinism() {
    const SyntheticScene room = room_scene(30, 0.002, 2);
    auto run = [&] {
        Pipeline p(seeded(11), room.intrinsics);
        for (int k = 0; k < room.frames(); ++k) p.process(render(room, k).frame);
        return encode(p.state());
    };
    const auto a = run(), b = run();
    return {a == b && !a.empty(), fmt("two runs: %zu B and %zu B, %s", a.size(), b.size(),
                                      a == b ? "byte-identical" : "different")};
}

// 10. Per-frame time on 320x240 input (reported, not gating).
Outcome performance() {
    const double reference_ms = 150.0;
    const double band_ms = 3.0 * reference_ms;  // regression band on this class of hardware
    const SyntheticScene room = room_scene(60, 0.002, 1);
    std::vector<RgbdFrame> frames;
    for (int k = 0; k < room.frames(); ++k) frames.push_back(render(room, k).frame);
    Pipeline p(seeded(1), room.intrinsics);
    std::vector<double> ms;
    for (const auto& f : frames) ms.push_back(p.process(f).times.total);
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0;
    for (double x : ms) mean += x / static_cast<double>(ms.size());
    const double median = sorted[sorted.size() / 2];
    const double p95 = sorted[static_cast<std::size_t>(0.95 * static_cast<double>(sorted.size() - 1))];
    return {mean <= band_ms, fmt("mean %.1f ms, median %.1f ms, p95 %.1f ms per frame (reference %.0f ms, band <= %.0f "
                                 "ms)",
                                 mean, median, p95, reference_ms, band_ms)};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int number;
        const char* name;
        bool gating;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "pixel area", true, pixel_area},
        {2, "parameterization round trips", true, round_trips},
        {3, "detection accuracy", true, detection_accuracy},
        {4, "statistic convergence", true, statistic_convergence},
        {5, "proxy filter", true, filter_behavior},
        {6, "hole filling", true, hole_filling},
        {7, "codec", true, codec},
        {8, "mesh topology", true, mesh_topology},
        {9, "determinism", true, determinism},
        {10, "performance", false, performance},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.number)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d (%s): %s%s: %s [%.1f s]\n", c.number, c.name, o.pass ? "PASS" : "FAIL",
                    c.gating ? "" : " (non-gating)", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        if (!o.pass && c.gating) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
