#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/image.hpp"
#include "shapeproxy/proxy.hpp"

namespace shapeproxy {

/// Parametric surface color, evaluated at the shape's own (u, v) in meters.
struct Texture {
    enum class Kind { Solid, Checker, Gradient };
    Kind kind = Kind::Solid;
    Rgb color{180, 180, 180};
    Rgb color2{60, 60, 60};
    double period = 0.25;  // checker square side or gradient length, meters

    Rgb sample(double u, double v) const;
};

/// A ground-truth shape clipped to a (u, v) rectangle minus holes.
struct SynthShape {
    std::uint32_t id = 0;
    ShapeModel shape;
    /// Bounds on the shape's (u, v). Planes use both, cylinders only v; spheres are whole.
    double u_min = -1.0, u_max = 1.0;
    double v_min = -1.0, v_max = 1.0;
    std::vector<std::array<double, 4>> holes;  // (u0, u1, v0, v1)
    Texture texture;

    bool contains(double u, double v) const;
    bool contains(const Vec3& p) const;
    /// Visible surface area inside the extents (sphere: full area).
    double area() const;
};

struct CameraPath {
    enum class Kind { Static, Orbit, Dolly };
    Kind kind = Kind::Static;
    int frames = 1;
    Vec3 up = Vec3::UnitZ();
    // Static: eye -> target. Dolly: eye -> eye_end while looking at target -> target_end.
    Vec3 eye = Vec3(0, -3, 1.5);
    Vec3 eye_end = Vec3(0, -3, 1.5);
    Vec3 target = Vec3::Zero();
    Vec3 target_end = Vec3::Zero();
    // Orbit: eye = center + radius (cos a, sin a, 0) + height up, a = start + sweep * i / (frames - 1).
    Vec3 center = Vec3::Zero();
    double radius = 3.0;
    double height = 1.5;
    double start = 0.0;  // radians
    double sweep = 0.0;  // radians

    CameraPose pose(int frame) const;
};

struct SynthNoise {
    enum class Kind { None, Constant, Axial };
    Kind kind = Kind::None;
    double sigma = 0.002;  // constant model, meters
    NoiseModel axial;
    std::uint64_t seed = 1;
};

struct SyntheticScene {
    std::vector<SynthShape> shapes;
    CameraPath path;
    SynthNoise noise;
    CameraIntrinsics intrinsics;

    int frames() const { return path.frames; }
    /// Throws std::invalid_argument when a shape, extent or the path is invalid.
    void validate() const;
    const SynthShape* find(std::uint32_t id) const;
};

struct RenderedFrame {
    RgbdFrame frame;
    Image<std::uint32_t> labels;  // true shape id per pixel, 0 = background
};

/// Nearest visible intersection per pixel, with optional depth noise seeded by
/// (seed, frame). Throws std::out_of_range when frame >= path length.
RenderedFrame render(const SyntheticScene& scene, int frame);
RenderedFrame render(const SyntheticScene& scene, const CameraIntrinsics& intrinsics, int frame);

/// Plain-text scene description; see docs/scene_format.md.
/// Throws std::runtime_error naming the line on malformed input.
SyntheticScene parse_scene(const std::string& text);
SyntheticScene load_scene(const std::filesystem::path& path);

/// Corner of a room: floor z = 0, walls x = 0 and y = 0, a vertical cylinder
/// and a sphere, seen from an orbiting camera.
SyntheticScene room_scene(int frames = 100, double noise_sigma = 0.002, std::uint64_t seed = 1);

struct ShapeReport {
    std::uint32_t shape_id = 0;
    ShapeKind kind = ShapeKind::Plane;
    bool detected = false;
    std::uint32_t proxy_id = 0;
    double normal_error = 0.0;  // radians: plane normal or cylinder axis
    double center_error = 0.0;  // meters: plane offset, axis distance or center distance
    double radius_error = 0.0;  // meters, signed
    double coverage = 0.0;      // emitting cells over the true extent
    double depth_rmse = 0.0;    // decompressed vs noiseless depth over covered pixels
    std::size_t depth_pixels = 0;
};

/// Best-matching proxy per true shape. Depth errors use the listed frames.
std::vector<ShapeReport> evaluate(const SceneState& state, const SyntheticScene& scene,
                                  std::span<const int> frames = {});

/// Proxy matching `truth` (same kind, closest parameters within loose bounds).
const Proxy* match_proxy(const SceneState& state, const SynthShape& truth);

}  // namespace shapeproxy
