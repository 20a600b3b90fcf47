#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "shapeproxy/image.hpp"

namespace shapeproxy {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Pinhole camera described by its field of view.
///
/// Pixel coordinates are (row, col). The outermost pixel centers sit exactly on
/// the frustum boundary, so col = 0 and col = res_h - 1 are at +-fov_h / 2 from
/// the optical axis. Camera space is x right, y down, z forward.
struct CameraIntrinsics {
    double fov_h = 1.0471975511965976;  // 60 deg
    double fov_v = 0.7853981633974483;  // 45 deg
    int res_h = 320;
    int res_v = 240;
    double depth_scale = 0.001;  // meters per stored depth unit

    /// Throws std::invalid_argument when any field is out of range.
    void validate() const;

    double focal_h() const;
    double focal_v() const;
    double center_col() const { return 0.5 * (res_h - 1); }
    double center_row() const { return 0.5 * (res_v - 1); }

    /// Camera-space point on the ray of (row, col) at z = depth.
    Vec3 unproject(double row, double col, double depth) const;
    /// (row, col) of a camera-space point; nullopt when z <= 0.
    std::optional<Vec2> project(const Vec3& p) const;
    /// Nearest pixel of a camera-space point, nullopt when outside the image.
    std::optional<std::pair<int, int>> project_to_pixel(const Vec3& p) const;

    /// Approximate footprint of one pixel at depth z: tan(fov_h/res_h) * tan(fov_v/res_v) * z^2.
    double pixel_area(double z) const;

    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Rigid camera-to-world transform.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const;

    Vec3 to_world(const Vec3& p) const { return rotation * p + translation; }
    Vec3 to_camera(const Vec3& p) const { return rotation.transpose() * (p - translation); }
    Vec3 direction_to_world(const Vec3& d) const { return rotation * d; }
    Vec3 direction_to_camera(const Vec3& d) const { return rotation.transpose() * d; }
    const Vec3& origin() const { return translation; }

    Mat4 matrix() const;
    static CameraPose from_matrix(const Mat4& m);
    /// Camera at `eye` looking at `target`, image rows pointing away from `up`.
    static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);
};

struct RgbdFrame {
    Image<double> depth;  // meters, 0 = invalid
    Image<Rgb> color;
    CameraIntrinsics intrinsics;
    CameraPose pose;
    int index = 0;

    RgbdFrame() = default;
    RgbdFrame(const CameraIntrinsics& k, const CameraPose& pose, int index = 0);

    bool valid(int row, int col) const { return depth(row, col) > 0.0; }
    void validate() const;
};

/// Camera-space oriented samples with their source pixel.
struct OrientedPointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    std::vector<Rgb> colors;
    std::vector<int> pixel_of;  // row * res_h + col, or -1 when not from an image

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    void reserve(std::size_t n);
    void push_back(const Vec3& p, const Vec3& n, Rgb c = {}, int pixel = -1);
};

/// Axial depth noise: sigma(z) = base + scale * (max(z, vertex) - vertex)^2.
///
/// Clamped below the vertex so the threshold is non-decreasing in z.
struct NoiseModel {
    double base = 0.0012;
    double scale = 0.0019;
    double vertex = 0.4;

    double sigma(double z) const;
};

/// Depth-dependent noise threshold. Throws std::domain_error for z <= 0.
double noise_threshold(double z, const NoiseModel& model = {});

/// Gaussian-weighted depth smoothing that ignores neighbors more than
/// `range_limit` meters away from the center depth.
RgbdFrame bilateral_prefilter(const RgbdFrame& frame, double spatial_sigma = 2.0,
                              double range_limit = 0.20);

/// Per-pixel normals from central differences of unprojected neighbors,
/// oriented toward the camera. Pixels with an invalid neighbor, a neighbor
/// further than `max_depth_jump`, or a degenerate cross product are skipped.
OrientedPointCloud estimate_normals(const RgbdFrame& frame, double max_depth_jump = 0.10);

/// Camera-space point for a pixel; nullopt when out of bounds or invalid.
std::optional<Vec3> unproject(const RgbdFrame& frame, int row, int col);

}  // namespace shapeproxy
