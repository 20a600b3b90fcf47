#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "shapeproxy/frame.hpp"

namespace shapeproxy {

enum class ShapeKind : std::uint8_t { Plane = 0, Cylinder = 1, Sphere = 2 };

std::string_view to_string(ShapeKind kind);

/// Plane, cylinder or sphere with a local frame.
///
/// `axis_x` and `axis_y` are orthonormal. Their cross product is the plane
/// normal, the cylinder axis, or the sphere zenith. `radius` is unused for
/// planes. Surface normals point outward (toward increasing signed distance).
struct ShapeModel {
    ShapeKind kind = ShapeKind::Plane;
    Vec3 origin = Vec3::Zero();
    Vec3 axis_x = Vec3::UnitX();
    Vec3 axis_y = Vec3::UnitY();
    double radius = 0.0;

    static ShapeModel plane(const Vec3& origin, const Vec3& axis_x, const Vec3& axis_y);
    /// Builds a frame around `axis`; `x_hint` is projected to the plane orthogonal to it.
    static ShapeModel cylinder(const Vec3& origin, const Vec3& axis, double radius,
                               const Vec3& x_hint = Vec3::UnitX());
    static ShapeModel sphere(const Vec3& center, double radius, const Vec3& axis_x = Vec3::UnitX(),
                             const Vec3& axis_y = Vec3::UnitY());

    /// X cross Y: plane normal, cylinder axis, sphere zenith.
    Vec3 axis() const { return axis_x.cross(axis_y); }

    /// Throws std::invalid_argument when the frame or radius is invalid.
    void validate() const;

    double signed_distance(const Vec3& p) const;
    /// Outward unit normal at the footpoint of p. Falls back to the frame axis on the medial axis.
    Vec3 normal_at(const Vec3& p) const;

    ShapeModel transformed(const CameraPose& pose) const;
};

struct SurfacePoint {
    Vec3 point;
    Vec3 normal;
};

/// Local 2D coordinates (u, v) in meters. Throws std::domain_error for a sphere at P = C.
Vec2 parameterize(const ShapeModel& shape, const Vec3& p);

/// Surface point and outward normal at (u, v). Throws std::domain_error outside
/// the parameter domain (cylinder u in [0, 2 pi r], sphere |u|, |v| <= pi r / 2).
SurfacePoint unparameterize(const ShapeModel& shape, double u, double v);

/// Nearest intersection in front of `camera_origin` of the ray through `p`.
std::optional<Vec3> project_along_ray(const ShapeModel& shape, const Vec3& camera_origin,
                                      const Vec3& p);

/// Ray parameters t > 0 (ascending) where origin + t * dir meets the surface.
/// Returns the number of hits written to `t`.
int ray_intersections(const ShapeModel& shape, const Vec3& origin, const Vec3& dir, double t[2]);

struct CellKey {
    int i = 0;
    int j = 0;

    friend bool operator==(const CellKey&, const CellKey&) = default;
    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        const auto packed = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.i)) << 32) |
                            static_cast<std::uint32_t>(k.j);
        return std::hash<std::uint64_t>{}(packed * 0x9E3779B97F4A7C15ull);
    }
};

/// Discretization of a shape's parameter domain into square cells.
///
/// The u/v ranges are half-open. Cylinders wrap u with period 2 pi r; spheres
/// clamp both coordinates into [-pi r / 2, pi r / 2]. Plane ranges grow to
/// cover the cells that exist.
struct GridSpec {
    double cell_size = 0.05;
    double u_min = 0.0;
    double u_max = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
    int color_res_log2 = 2;
    double u_period = 0.0;  // > 0 wraps u
    bool fixed_u = false;   // u range is the full shape domain
    bool fixed_v = false;

    static GridSpec for_shape(const ShapeModel& shape, double cell_size = 0.05,
                              int color_res_log2 = 2);

    int color_side() const { return 1 << color_res_log2; }

    /// Inclusive index range covered by the u/v intervals.
    int i_lo() const;
    int i_hi() const;
    int j_lo() const;
    int j_hi() const;
    int columns() const { return i_hi() - i_lo() + 1; }
    int rows() const { return j_hi() - j_lo() + 1; }

    CellKey cell_of(double u, double v) const;
    bool contains(const CellKey& key) const;
    /// Extends non-fixed ranges so the cell is covered.
    void include(const CellKey& key);

    /// Lower corner of a cell, clamped into a fixed domain.
    Vec2 cell_origin(const CellKey& key) const;
    Vec2 cell_center(const CellKey& key) const;
    /// Clamps (u, v) into the fixed parts of the domain.
    Vec2 clamp(double u, double v) const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

CellKey cell_of(const GridSpec& spec, double u, double v);

}  // namespace shapeproxy
