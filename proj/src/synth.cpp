#include "shapeproxy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "shapeproxy/codec.hpp"

namespace shapeproxy {

namespace {

constexpr double kPi = std::numbers::pi;

Rgb lerp(Rgb a, Rgb b, double t) {
    auto mix = [t](std::uint8_t x, std::uint8_t y) {
        return static_cast<std::uint8_t>(std::lround((1.0 - t) * x + t * y));
    };
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

Rgb Texture::sample(double u, double v) const {
    switch (kind) {
        case Kind::Solid: return color;
        case Kind::Checker: {
            const long a = static_cast<long>(std::floor(u / period));
            const long b = static_cast<long>(std::floor(v / period));
            return ((a + b) & 1) == 0 ? color : color2;
        }
        case Kind::Gradient: {
            double t = std::fmod(u / period, 1.0);
            if (t < 0.0) t += 1.0;
            return lerp(color, color2, t);
        }
    }
    return color;
}

bool SynthShape::contains(double u, double v) const {
    switch (shape.kind) {
        case ShapeKind::Plane:
            if (u < u_min || u > u_max || v < v_min || v > v_max) return false;
            break;
        case ShapeKind::Cylinder:
            if (v < v_min || v > v_max) return false;
            break;
        case ShapeKind::Sphere: break;
    }
    for (const auto& h : holes)
        if (u > h[0] && u < h[1] && v > h[2] && v < h[3]) return false;
    return true;
}

bool SynthShape::contains(const Vec3& p) const {
    if (shape.kind == ShapeKind::Sphere && holes.empty()) return true;
    const Vec2 uv = parameterize(shape, p);
    return contains(uv.x(), uv.y());
}

double SynthShape::area() const {
    double holes_area = 0.0;
    for (const auto& h : holes) holes_area += (h[1] - h[0]) * (h[3] - h[2]);
    switch (shape.kind) {
        case ShapeKind::Plane: return (u_max - u_min) * (v_max - v_min) - holes_area;
        case ShapeKind::Cylinder: return 2.0 * kPi * shape.radius * (v_max - v_min) - holes_area;
        case ShapeKind::Sphere: return 4.0 * kPi * shape.radius * shape.radius;
    }
    return 0.0;
}

CameraPose CameraPath::pose(int frame) const {
    const double t = frames > 1 ? static_cast<double>(frame) / (frames - 1) : 0.0;
    switch (kind) {
        case Kind::Static: return CameraPose::look_at(eye, target, up);
        case Kind::Dolly:
            return CameraPose::look_at(eye + t * (eye_end - eye), target + t * (target_end - target), up);
        case Kind::Orbit: {
            const double a = start + sweep * t;
            const Vec3 u = up.normalized();
            Vec3 e1 = Vec3::UnitX() - Vec3::UnitX().dot(u) * u;
            if (e1.norm() < 1e-6) e1 = Vec3::UnitY() - Vec3::UnitY().dot(u) * u;
            e1.normalize();
            const Vec3 e2 = u.cross(e1);
            const Vec3 e = center + radius * (std::cos(a) * e1 + std::sin(a) * e2) + height * u;
            return CameraPose::look_at(e, target, up);
        }
    }
    return {};
}

void SyntheticScene::validate() const {
    intrinsics.validate();
    if (path.frames < 0) throw std::invalid_argument("camera path has negative length");
    for (const auto& s : shapes) {
        s.shape.validate();
        if (s.shape.kind == ShapeKind::Plane && !(s.u_max > s.u_min && s.v_max > s.v_min))
            throw std::invalid_argument("plane " + std::to_string(s.id) + " has empty extents");
        if (s.shape.kind == ShapeKind::Cylinder && !(s.v_max > s.v_min))
            throw std::invalid_argument("cylinder " + std::to_string(s.id) + " has empty extents");
        if (s.id == 0) throw std::invalid_argument("shape id 0 is reserved for background");
    }
}

const SynthShape* SyntheticScene::find(std::uint32_t id) const {
    for (const auto& s : shapes)
        if (s.id == id) return &s;
    return nullptr;
}

RenderedFrame render(const SyntheticScene& scene, int frame) { return render(scene, scene.intrinsics, frame); }

RenderedFrame render(const SyntheticScene& scene, const CameraIntrinsics& k, int frame) {
    if (frame < 0 || frame >= scene.path.frames) throw std::out_of_range("frame index outside the camera path");
    const CameraPose pose = scene.path.pose(frame);
    RenderedFrame out{RgbdFrame(k, pose, frame), Image<std::uint32_t>(k.res_h, k.res_v, 0u)};

    for (int row = 0; row < k.res_v; ++row)
        for (int col = 0; col < k.res_h; ++col) {
            // Camera ray with unit z: the ray parameter is the depth.
            const Vec3 dir = pose.direction_to_world(k.unproject(row, col, 1.0));
            double best = std::numeric_limits<double>::infinity();
            const SynthShape* hit = nullptr;
            for (const auto& s : scene.shapes) {
                double t[2];
                const int n = ray_intersections(s.shape, pose.origin(), dir, t);
                for (int h = 0; h < n; ++h) {
                    if (t[h] >= best) break;
                    if (!s.contains(pose.origin() + t[h] * dir)) continue;
                    best = t[h];
                    hit = &s;
                    break;
                }
            }
            if (!hit) continue;
            out.frame.depth(row, col) = best;
            out.labels(row, col) = hit->id;
            const Vec2 uv = parameterize(hit->shape, pose.origin() + best * dir);
            out.frame.color(row, col) = hit->texture.sample(uv.x(), uv.y());
        }

    if (scene.noise.kind != SynthNoise::Kind::None) {
        std::mt19937_64 rng(splitmix(scene.noise.seed ^ splitmix(static_cast<std::uint64_t>(frame))));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& z : out.frame.depth.pixels()) {
            if (z <= 0.0) continue;
            const double sigma =
                scene.noise.kind == SynthNoise::Kind::Constant ? scene.noise.sigma : scene.noise.axial.sigma(z);
            z = std::max(z + sigma * gauss(rng), 1e-6);
        }
    }
    return out;
}

namespace {

struct Record {
    std::string type;
    std::map<std::string, std::string> fields;
    int line = 0;
};

[[noreturn]] void fail(int line, const std::string& what) {
    throw std::runtime_error("scene line " + std::to_string(line) + ": " + what);
}

std::vector<double> numbers(const Record& r, const std::string& key, std::size_t count) {
    auto it = r.fields.find(key);
    if (it == r.fields.end()) fail(r.line, "missing '" + key + "'");
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            fail(r.line, "bad number '" + tok + "' in '" + key + "'");
        }
    }
    if (out.size() != count)
        fail(r.line, "'" + key + "' needs " + std::to_string(count) + " values");
    return out;
}

bool has(const Record& r, const std::string& key) { return r.fields.count(key) > 0; }

double number(const Record& r, const std::string& key) { return numbers(r, key, 1)[0]; }
double number_or(const Record& r, const std::string& key, double fallback) {
    return has(r, key) ? number(r, key) : fallback;
}

Vec3 vec3(const Record& r, const std::string& key) {
    const auto v = numbers(r, key, 3);
    return {v[0], v[1], v[2]};
}

Rgb color(const Record& r, const std::string& key, Rgb fallback) {
    if (!has(r, key)) return fallback;
    const auto v = numbers(r, key, 3);
    auto byte = [&](double x) {
        if (x < 0.0 || x > 255.0) fail(r.line, "color component out of range");
        return static_cast<std::uint8_t>(std::lround(x));
    };
    return {byte(v[0]), byte(v[1]), byte(v[2])};
}

double degrees(double d) { return d * kPi / 180.0; }

Texture texture(const Record& r) {
    Texture t;
    if (has(r, "texture")) {
        const std::string& kind = r.fields.at("texture");
        if (kind == "solid") t.kind = Texture::Kind::Solid;
        else if (kind == "checker") t.kind = Texture::Kind::Checker;
        else if (kind == "gradient") t.kind = Texture::Kind::Gradient;
        else fail(r.line, "unknown texture '" + kind + "'");
    }
    t.color = color(r, "color", t.color);
    t.color2 = color(r, "color2", t.color2);
    t.period = number_or(r, "period", t.period);
    if (!(t.period > 0.0)) fail(r.line, "texture period must be positive");
    return t;
}

void read_extent(const Record& r, const std::string& key, double& lo, double& hi) {
    if (!has(r, key)) return;
    const auto v = numbers(r, key, 2);
    lo = v[0];
    hi = v[1];
}

}  // namespace

SyntheticScene parse_scene(const std::string& text) {
    SyntheticScene scene;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    std::uint32_t next_id = 1;
    int frames = -1;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        Record r;
        r.line = lineno;
        if (!(ls >> r.type)) continue;
        std::string tok;
        std::vector<std::string> bare;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                bare.push_back(tok);
                continue;
            }
            const std::string key = tok.substr(0, eq);
            if (key == "hole") r.fields["hole#" + std::to_string(r.fields.size())] = tok.substr(eq + 1);
            else r.fields[key] = tok.substr(eq + 1);
        }

        try {
            if (r.type == "plane" || r.type == "cylinder" || r.type == "sphere") {
                SynthShape s;
                s.id = has(r, "id") ? static_cast<std::uint32_t>(number(r, "id")) : next_id;
                next_id = std::max(next_id, s.id + 1);
                if (r.type == "plane") {
                    s.shape = ShapeModel::plane(vec3(r, "origin"), vec3(r, "x").normalized(), vec3(r, "y").normalized());
                    read_extent(r, "u", s.u_min, s.u_max);
                    read_extent(r, "v", s.v_min, s.v_max);
                } else if (r.type == "cylinder") {
                    const Vec3 hint = has(r, "x") ? vec3(r, "x") : Vec3(Vec3::UnitX());
                    s.shape = ShapeModel::cylinder(vec3(r, "origin"), vec3(r, "axis").normalized(), number(r, "radius"), hint);
                    read_extent(r, "v", s.v_min, s.v_max);
                } else {
                    s.shape = ShapeModel::sphere(vec3(r, "center"), number(r, "radius"));
                }
                for (const auto& [key, value] : r.fields) {
                    if (key.rfind("hole#", 0) != 0) continue;
                    Record h{r.type, {{"hole", value}}, r.line};
                    const auto v = numbers(h, "hole", 4);
                    s.holes.push_back({v[0], v[1], v[2], v[3]});
                }
                s.texture = texture(r);
                s.shape.validate();
                scene.shapes.push_back(std::move(s));
            } else if (r.type == "path") {
                if (bare.empty()) fail(lineno, "path needs a kind (static, orbit, dolly)");
                CameraPath& p = scene.path;
                if (has(r, "up")) p.up = vec3(r, "up");
                if (bare[0] == "static") {
                    p.kind = CameraPath::Kind::Static;
                    p.eye = vec3(r, "eye");
                    p.target = vec3(r, "target");
                } else if (bare[0] == "dolly") {
                    p.kind = CameraPath::Kind::Dolly;
                    p.eye = vec3(r, "from");
                    p.eye_end = vec3(r, "to");
                    p.target = vec3(r, "target");
                    p.target_end = has(r, "target_to") ? vec3(r, "target_to") : p.target;
                } else if (bare[0] == "orbit") {
                    p.kind = CameraPath::Kind::Orbit;
                    p.center = vec3(r, "center");
                    p.radius = number(r, "radius");
                    p.height = number_or(r, "height", 0.0);
                    p.start = degrees(number_or(r, "start", 0.0));
                    p.sweep = degrees(number_or(r, "sweep", 360.0));
                    p.target = has(r, "target") ? vec3(r, "target") : p.center;
                } else {
                    fail(lineno, "unknown path kind '" + bare[0] + "'");
                }
                if (has(r, "frames")) frames = static_cast<int>(number(r, "frames"));
            } else if (r.type == "frames") {
                if (bare.size() != 1) fail(lineno, "frames needs one count");
                frames = std::stoi(bare[0]);
            } else if (r.type == "noise") {
                const std::string model = has(r, "model") ? r.fields.at("model") : "axial";
                if (model == "none") scene.noise.kind = SynthNoise::Kind::None;
                else if (model == "constant") scene.noise.kind = SynthNoise::Kind::Constant;
                else if (model == "axial") scene.noise.kind = SynthNoise::Kind::Axial;
                else fail(lineno, "unknown noise model '" + model + "'");
                scene.noise.sigma = number_or(r, "sigma", scene.noise.sigma);
                scene.noise.seed = static_cast<std::uint64_t>(number_or(r, "seed", static_cast<double>(scene.noise.seed)));
                scene.noise.axial.base = number_or(r, "base", scene.noise.axial.base);
                scene.noise.axial.scale = number_or(r, "scale", scene.noise.axial.scale);
                scene.noise.axial.vertex = number_or(r, "vertex", scene.noise.axial.vertex);
            } else if (r.type == "intrinsics") {
                CameraIntrinsics& k = scene.intrinsics;
                k.fov_h = degrees(number_or(r, "fov_h", 60.0));
                k.fov_v = degrees(number_or(r, "fov_v", 45.0));
                k.res_h = static_cast<int>(number_or(r, "width", k.res_h));
                k.res_v = static_cast<int>(number_or(r, "height", k.res_v));
                k.depth_scale = number_or(r, "depth_scale", k.depth_scale);
            } else {
                fail(lineno, "unknown record '" + r.type + "'");
            }
        } catch (const std::invalid_argument& e) {
            fail(lineno, e.what());
        }
    }
    if (frames >= 0) scene.path.frames = frames;
    try {
        scene.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("scene: ") + e.what());
    }
    return scene;
}

SyntheticScene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_scene(ss.str());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

SyntheticScene room_scene(int frames, double noise_sigma, std::uint64_t seed) {
    SyntheticScene scene;
    SynthShape floor;
    floor.id = 1;
    floor.shape = ShapeModel::plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
    floor.u_min = 0.0, floor.u_max = 4.0, floor.v_min = 0.0, floor.v_max = 4.0;
    floor.texture = {Texture::Kind::Checker, {200, 190, 170}, {90, 80, 70}, 0.5};

    SynthShape wall_x;
    wall_x.id = 2;
    wall_x.shape = ShapeModel::plane(Vec3::Zero(), Vec3::UnitY(), Vec3::UnitZ());
    wall_x.u_min = 0.0, wall_x.u_max = 4.0, wall_x.v_min = 0.0, wall_x.v_max = 2.5;
    wall_x.texture = {Texture::Kind::Gradient, {220, 220, 210}, {120, 140, 180}, 1.0};

    SynthShape wall_y;
    wall_y.id = 3;
    wall_y.shape = ShapeModel::plane(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitX());
    wall_y.u_min = 0.0, wall_y.u_max = 2.5, wall_y.v_min = 0.0, wall_y.v_max = 4.0;
    wall_y.texture = {Texture::Kind::Solid, {210, 200, 160}, {}, 1.0};

    SynthShape column;
    column.id = 4;
    column.shape = ShapeModel::cylinder(Vec3(1.0, 2.4, 0.0), Vec3::UnitZ(), 0.3);
    column.v_min = 0.0, column.v_max = 2.5;
    column.texture = {Texture::Kind::Checker, {160, 60, 60}, {230, 230, 230}, 0.2};

    SynthShape ball;
    ball.id = 5;
    ball.shape = ShapeModel::sphere(Vec3(2.4, 1.0, 0.5), 0.5);
    ball.texture = {Texture::Kind::Gradient, {40, 90, 200}, {240, 240, 80}, 0.6};

    scene.shapes = {floor, wall_x, wall_y, column, ball};
    scene.path.kind = CameraPath::Kind::Orbit;
    scene.path.frames = frames;
    scene.path.center = Vec3(1.2, 1.2, 0.0);
    scene.path.target = Vec3(1.2, 1.2, 0.6);
    scene.path.radius = 3.2;
    scene.path.height = 1.6;
    scene.path.start = degrees(20.0);
    scene.path.sweep = degrees(50.0);
    scene.noise.kind = noise_sigma > 0.0 ? SynthNoise::Kind::Constant : SynthNoise::Kind::None;
    scene.noise.sigma = noise_sigma;
    scene.noise.seed = seed;
    return scene;
}

namespace {

double axis_angle(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0));
}

double line_distance(const Vec3& p, const Vec3& q, const Vec3& dir) {
    const Vec3 d = dir.normalized();
    const Vec3 w = q - p;
    return (w - w.dot(d) * d).norm();
}

struct Errors {
    double angle = 0.0;
    double center = 0.0;
    double radius = 0.0;
};

Errors compare(const ShapeModel& truth, const ShapeModel& est) {
    Errors e;
    switch (truth.kind) {
        case ShapeKind::Plane:
            e.angle = axis_angle(truth.axis(), est.axis());
            e.center = std::abs(est.signed_distance(truth.origin));
            break;
        case ShapeKind::Cylinder:
            e.angle = axis_angle(truth.axis(), est.axis());
            e.center = line_distance(truth.origin, est.origin, est.axis());
            e.radius = est.radius - truth.radius;
            break;
        case ShapeKind::Sphere:
            e.center = (est.origin - truth.origin).norm();
            e.radius = est.radius - truth.radius;
            break;
    }
    return e;
}

std::vector<Vec3> extent_samples(const SynthShape& s, double spacing) {
    std::vector<Vec3> pts;
    const ShapeModel& m = s.shape;
    switch (m.kind) {
        case ShapeKind::Plane:
            for (double v = s.v_min + 0.5 * spacing; v < s.v_max; v += spacing)
                for (double u = s.u_min + 0.5 * spacing; u < s.u_max; u += spacing)
                    if (s.contains(u, v)) pts.push_back(unparameterize(m, u, v).point);
            break;
        case ShapeKind::Cylinder: {
            const double period = 2.0 * kPi * m.radius;
            for (double v = s.v_min + 0.5 * spacing; v < s.v_max; v += spacing)
                for (double u = 0.5 * spacing; u < period; u += spacing)
                    if (s.contains(u, v)) pts.push_back(unparameterize(m, u, v).point);
            break;
        }
        case ShapeKind::Sphere: {
            // Fibonacci lattice, roughly one point per spacing^2.
            const auto n = static_cast<std::size_t>(std::max(1.0, s.area() / (spacing * spacing)));
            const double golden = kPi * (3.0 - std::sqrt(5.0));
            for (std::size_t i = 0; i < n; ++i) {
                const double z = 1.0 - 2.0 * (i + 0.5) / static_cast<double>(n);
                const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double a = golden * static_cast<double>(i);
                pts.push_back(m.origin + m.radius * Vec3(rho * std::cos(a), rho * std::sin(a), z));
            }
            break;
        }
    }
    return pts;
}

bool covered(const Proxy& proxy, const Vec3& p) {
    Vec2 uv;
    try {
        uv = parameterize(proxy.shape, p);
    } catch (const std::domain_error&) {
        return false;
    }
    const CellKey key = proxy.spec.cell_of(uv.x(), uv.y());
    auto it = proxy.cells.find(key);
    return it != proxy.cells.end() && it->second.emitting();
}

}  // namespace

const Proxy* match_proxy(const SceneState& state, const SynthShape& truth) {
    const Proxy* best = nullptr;
    double best_score = std::numeric_limits<double>::infinity();
    for (const auto& p : state.proxies) {
        if (p.shape.kind != truth.shape.kind) continue;
        const Errors e = compare(truth.shape, p.shape);
        if (e.angle > 0.26 || e.center > 0.25 || std::abs(e.radius) > 0.25) continue;
        const double score = e.angle + e.center + std::abs(e.radius);
        if (score < best_score) {
            best_score = score;
            best = &p;
        }
    }
    return best;
}

std::vector<ShapeReport> evaluate(const SceneState& state, const SyntheticScene& scene, std::span<const int> frames) {
    std::vector<ShapeReport> reports;
    std::map<std::uint32_t, std::size_t> index_of;
    std::vector<const Proxy*> matched;
    for (const auto& s : scene.shapes) {
        ShapeReport r;
        r.shape_id = s.id;
        r.kind = s.shape.kind;
        const Proxy* p = match_proxy(state, s);
        if (p) {
            r.detected = true;
            r.proxy_id = p->id;
            const Errors e = compare(s.shape, p->shape);
            r.normal_error = e.angle;
            r.center_error = e.center;
            r.radius_error = e.radius;
            const auto pts = extent_samples(s, 0.5 * p->spec.cell_size);
            std::size_t hit = 0;
            for (const auto& q : pts)
                if (covered(*p, q)) ++hit;
            r.coverage = pts.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pts.size());
        }
        index_of[s.id] = reports.size();
        reports.push_back(r);
        matched.push_back(p);
    }

    if (frames.empty()) return reports;
    SyntheticScene clean = scene;
    clean.noise.kind = SynthNoise::Kind::None;
    std::vector<double> sq(reports.size(), 0.0);
    for (int f : frames) {
        const RenderedFrame truth = render(clean, f);
        const CameraPose pose = scene.path.pose(f);
        const Image<double> rec = decompress_frame(state, scene.intrinsics, pose);
        const Image<std::uint32_t> seen = visible_proxies(state, scene.intrinsics, pose);
        for (std::size_t px = 0; px < rec.size(); ++px) {
            const std::uint32_t label = truth.labels[px];
            if (label == 0 || rec[px] <= 0.0) continue;
            const std::size_t k = index_of.at(label);
            if (!matched[k] || seen[px] != matched[k]->id) continue;
            const double d = rec[px] - truth.frame.depth[px];
            sq[k] += d * d;
            ++reports[k].depth_pixels;
        }
    }
    for (std::size_t k = 0; k < reports.size(); ++k)
        if (reports[k].depth_pixels > 0) reports[k].depth_rmse = std::sqrt(sq[k] / reports[k].depth_pixels);
    return reports;
}

}  // namespace shapeproxy
