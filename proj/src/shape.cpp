#include "shapeproxy/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace shapeproxy {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDomainTolerance = 1e-9;

Vec3 component_orthogonal(const Vec3& v, const Vec3& axis) { return v - v.dot(axis) * axis; }

}  // namespace

std::string_view to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Plane: return "plane";
        case ShapeKind::Cylinder: return "cylinder";
        case ShapeKind::Sphere: return "sphere";
    }
    return "unknown";
}

ShapeModel ShapeModel::plane(const Vec3& origin, const Vec3& axis_x, const Vec3& axis_y) {
    ShapeModel s;
    s.kind = ShapeKind::Plane;
    s.origin = origin;
    s.axis_x = axis_x.normalized();
    s.axis_y = component_orthogonal(axis_y, s.axis_x).normalized();
    return s;
}

ShapeModel ShapeModel::cylinder(const Vec3& origin, const Vec3& axis, double radius,
                                const Vec3& x_hint) {
    const Vec3 a = axis.normalized();
    Vec3 x = component_orthogonal(x_hint, a);
    if (x.norm() < 1e-6) x = a.unitOrthogonal();
    x.normalize();
    ShapeModel s;
    s.kind = ShapeKind::Cylinder;
    s.origin = origin;
    s.axis_x = x;
    s.axis_y = a.cross(x);  // X x Y = A
    s.radius = radius;
    return s;
}

ShapeModel ShapeModel::sphere(const Vec3& center, double radius, const Vec3& axis_x,
                              const Vec3& axis_y) {
    ShapeModel s = plane(center, axis_x, axis_y);
    s.kind = ShapeKind::Sphere;
    s.radius = radius;
    return s;
}

void ShapeModel::validate() const {
    if (!origin.allFinite()) throw std::invalid_argument("shape origin is not finite");
    if (std::abs(axis_x.norm() - 1.0) > 1e-6 || std::abs(axis_y.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("shape axes must be unit vectors");
    if (std::abs(axis_x.dot(axis_y)) > 1e-6)
        throw std::invalid_argument("shape axes must be orthogonal");
    if (kind != ShapeKind::Plane && !(radius > 0.0))
        throw std::invalid_argument("cylinder/sphere radius must be positive");
}

double ShapeModel::signed_distance(const Vec3& p) const {
    const Vec3 pc = p - origin;
    switch (kind) {
        case ShapeKind::Plane: return pc.dot(axis());
        case ShapeKind::Cylinder: return component_orthogonal(pc, axis()).norm() - radius;
        case ShapeKind::Sphere: return pc.norm() - radius;
    }
    return 0.0;
}

Vec3 ShapeModel::normal_at(const Vec3& p) const {
    const Vec3 pc = p - origin;
    switch (kind) {
        case ShapeKind::Plane: return axis();
        case ShapeKind::Cylinder: {
            const Vec3 radial = component_orthogonal(pc, axis());
            const double len = radial.norm();
            return len > 0.0 ? Vec3(radial / len) : axis_x;
        }
        case ShapeKind::Sphere: {
            const double len = pc.norm();
            return len > 0.0 ? Vec3(pc / len) : axis();
        }
    }
    return axis();
}

ShapeModel ShapeModel::transformed(const CameraPose& pose) const {
    ShapeModel s = *this;
    s.origin = pose.to_world(origin);
    s.axis_x = pose.direction_to_world(axis_x);
    s.axis_y = pose.direction_to_world(axis_y);
    return s;
}

Vec2 parameterize(const ShapeModel& shape, const Vec3& p) {
    const Vec3 pc = p - shape.origin;
    switch (shape.kind) {
        case ShapeKind::Plane: return {pc.dot(shape.axis_x), pc.dot(shape.axis_y)};
        case ShapeKind::Cylinder: {
            const double angle = std::atan2(pc.dot(shape.axis_y), pc.dot(shape.axis_x));
            return {shape.radius * (kPi + angle), pc.dot(shape.axis())};
        }
        case ShapeKind::Sphere: {
            const double len = pc.norm();
            if (!(len > 0.0)) throw std::domain_error("parameterize: point at sphere center");
            const Vec3 d = pc / len;
            const double x = d.dot(shape.axis_x);
            const double y = d.dot(shape.axis_y);
            const double z = d.dot(shape.axis());
            const double n = std::abs(x) + std::abs(y) + std::abs(z);
            double u, v;
            if (z >= 0.0) {
                u = x / n;
                v = y / n;
            } else {
                // Lower hemisphere folds out to the corners of the square.
                u = x >= 0.0 ? 1.0 - std::abs(y) / n : std::abs(y) / n - 1.0;
                v = y >= 0.0 ? 1.0 - std::abs(x) / n : std::abs(x) / n - 1.0;
            }
            const double scale = 0.5 * kPi * shape.radius;
            return {scale * u, scale * v};
        }
    }
    return {0.0, 0.0};
}

SurfacePoint unparameterize(const ShapeModel& shape, double u, double v) {
    if (!std::isfinite(u) || !std::isfinite(v))
        throw std::domain_error("unparameterize: non-finite coordinates");
    switch (shape.kind) {
        case ShapeKind::Plane:
            return {shape.origin + u * shape.axis_x + v * shape.axis_y, shape.axis()};
        case ShapeKind::Cylinder: {
            const double period = 2.0 * kPi * shape.radius;
            const double tol = kDomainTolerance * std::max(1.0, period);
            if (u < -tol || u > period + tol)
                throw std::domain_error("unparameterize: cylinder u outside [0, 2 pi r]");
            const double angle = u / shape.radius - kPi;
            const Vec3 radial = std::cos(angle) * shape.axis_x + std::sin(angle) * shape.axis_y;
            return {shape.origin + shape.radius * radial + v * shape.axis(), radial};
        }
        case ShapeKind::Sphere: {
            const double scale = 0.5 * kPi * shape.radius;
            double s = u / scale;
            double t = v / scale;
            const double tol = kDomainTolerance * std::max(1.0, 1.0 / scale);
            if (std::abs(s) > 1.0 + tol || std::abs(t) > 1.0 + tol)
                throw std::domain_error("unparameterize: sphere (u, v) outside the octahedral square");
            s = std::clamp(s, -1.0, 1.0);
            t = std::clamp(t, -1.0, 1.0);
            double x, y, z;
            if (std::abs(s) + std::abs(t) <= 1.0) {
                x = s;
                y = t;
                z = 1.0 - std::abs(s) - std::abs(t);
            } else {
                x = std::copysign(1.0 - std::abs(t), s);
                y = std::copysign(1.0 - std::abs(s), t);
                z = 1.0 - std::abs(s) - std::abs(t);
            }
            const Vec3 dir = (x * shape.axis_x + y * shape.axis_y + z * shape.axis()).normalized();
            return {shape.origin + shape.radius * dir, dir};
        }
    }
    return {shape.origin, shape.axis()};
}

int ray_intersections(const ShapeModel& shape, const Vec3& origin, const Vec3& dir, double t[2]) {
    const Vec3 w = origin - shape.origin;
    if (shape.kind == ShapeKind::Plane) {
        const Vec3 n = shape.axis();
        const double denom = dir.dot(n);
        if (std::abs(denom) <= 1e-12 * dir.norm()) return 0;
        const double hit = -w.dot(n) / denom;
        if (!(hit > 0.0)) return 0;
        t[0] = hit;
        return 1;
    }

    Vec3 d = dir;
    Vec3 o = w;
    if (shape.kind == ShapeKind::Cylinder) {
        const Vec3 a = shape.axis();
        d = component_orthogonal(dir, a);
        o = component_orthogonal(w, a);
    }
    const double qa = d.squaredNorm();
    if (qa <= 1e-24 * std::max(1.0, dir.squaredNorm())) return 0;
    const double qb = 2.0 * o.dot(d);
    const double qc = o.squaredNorm() - shape.radius * shape.radius;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return 0;
    const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
    double r0 = q / qa;
    double r1 = q != 0.0 ? qc / q : r0;
    if (r0 > r1) std::swap(r0, r1);
    int count = 0;
    if (r0 > 0.0) t[count++] = r0;
    if (r1 > 0.0 && (count == 0 || r1 != t[0])) t[count++] = r1;
    return count;
}

std::optional<Vec3> project_along_ray(const ShapeModel& shape, const Vec3& camera_origin,
                                      const Vec3& p) {
    const Vec3 dir = p - camera_origin;
    if (!(dir.squaredNorm() > 0.0)) return std::nullopt;
    double t[2];
    if (ray_intersections(shape, camera_origin, dir, t) == 0) return std::nullopt;
    return camera_origin + t[0] * dir;
}

GridSpec GridSpec::for_shape(const ShapeModel& shape, double cell_size, int color_res_log2) {
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
    if (color_res_log2 < 0) throw std::invalid_argument("color resolution must be >= 0");
    GridSpec spec;
    spec.cell_size = cell_size;
    spec.color_res_log2 = color_res_log2;
    switch (shape.kind) {
        case ShapeKind::Plane: break;
        case ShapeKind::Cylinder:
            spec.u_min = 0.0;
            spec.u_max = 2.0 * kPi * shape.radius;
            spec.u_period = spec.u_max;
            spec.fixed_u = true;
            break;
        case ShapeKind::Sphere: {
            const double half = 0.5 * kPi * shape.radius;
            spec.u_min = spec.v_min = -half;
            spec.u_max = spec.v_max = half;
            spec.fixed_u = spec.fixed_v = true;
            break;
        }
    }
    return spec;
}

namespace {
// Index bounds tolerate rounding in range ends built from key * cell_size.
constexpr double kIndexSlack = 1e-9;
int lower_index(double x, double w) { return static_cast<int>(std::floor(x / w + kIndexSlack)); }
int upper_index(double x, double w) { return static_cast<int>(std::ceil(x / w - kIndexSlack)) - 1; }
}  // namespace

int GridSpec::i_lo() const { return lower_index(u_min, cell_size); }
int GridSpec::i_hi() const { return upper_index(u_max, cell_size); }
int GridSpec::j_lo() const { return lower_index(v_min, cell_size); }
int GridSpec::j_hi() const { return upper_index(v_max, cell_size); }

CellKey GridSpec::cell_of(double u, double v) const {
    if (u_period > 0.0) {
        u -= u_period * std::floor(u / u_period);
        if (u >= u_period) u = 0.0;
    }
    int i = static_cast<int>(std::floor(u / cell_size));
    int j = static_cast<int>(std::floor(v / cell_size));
    if (fixed_u) i = std::clamp(i, i_lo(), i_hi());
    if (fixed_v) j = std::clamp(j, j_lo(), j_hi());
    return {i, j};
}

bool GridSpec::contains(const CellKey& key) const {
    return key.i >= i_lo() && key.i <= i_hi() && key.j >= j_lo() && key.j <= j_hi();
}

void GridSpec::include(const CellKey& key) {
    if (!fixed_u) {
        if (u_max <= u_min) {
            u_min = key.i * cell_size;
            u_max = (key.i + 1) * cell_size;
        } else {
            u_min = std::min(u_min, key.i * cell_size);
            u_max = std::max(u_max, (key.i + 1) * cell_size);
        }
    }
    if (!fixed_v) {
        if (v_max <= v_min) {
            v_min = key.j * cell_size;
            v_max = (key.j + 1) * cell_size;
        } else {
            v_min = std::min(v_min, key.j * cell_size);
            v_max = std::max(v_max, (key.j + 1) * cell_size);
        }
    }
}

Vec2 GridSpec::clamp(double u, double v) const {
    if (fixed_u) u = std::clamp(u, u_min, u_max);
    if (fixed_v) v = std::clamp(v, v_min, v_max);
    return {u, v};
}

Vec2 GridSpec::cell_origin(const CellKey& key) const {
    return clamp(key.i * cell_size, key.j * cell_size);
}

Vec2 GridSpec::cell_center(const CellKey& key) const {
    const Vec2 lo = clamp(key.i * cell_size, key.j * cell_size);
    const Vec2 hi = clamp((key.i + 1) * cell_size, (key.j + 1) * cell_size);
    return 0.5 * (lo + hi);
}

CellKey cell_of(const GridSpec& spec, double u, double v) { return spec.cell_of(u, v); }

}  // namespace shapeproxy
