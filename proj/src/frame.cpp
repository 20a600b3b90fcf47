#include "shapeproxy/frame.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Geometry>

namespace shapeproxy {

void CameraIntrinsics::validate() const {
    if (!(fov_h > 0.0 && fov_h < std::numbers::pi) || !(fov_v > 0.0 && fov_v < std::numbers::pi))
        throw std::invalid_argument("field of view must lie in (0, pi)");
    if (res_h < 1 || res_v < 1)
        throw std::invalid_argument("resolution must be at least 1x1");
    if (!(depth_scale > 0.0))
        throw std::invalid_argument("depth_scale must be positive");
}

double CameraIntrinsics::focal_h() const {
    // Single-column images have no horizontal extent; fall back to a unit half-width.
    const double half = res_h > 1 ? center_col() : 0.5;
    return half / std::tan(0.5 * fov_h);
}

double CameraIntrinsics::focal_v() const {
    const double half = res_v > 1 ? center_row() : 0.5;
    return half / std::tan(0.5 * fov_v);
}

Vec3 CameraIntrinsics::unproject(double row, double col, double depth) const {
    return {(col - center_col()) / focal_h() * depth, (row - center_row()) / focal_v() * depth,
            depth};
}

std::optional<Vec2> CameraIntrinsics::project(const Vec3& p) const {
    if (!(p.z() > 0.0)) return std::nullopt;
    return Vec2{p.y() / p.z() * focal_v() + center_row(), p.x() / p.z() * focal_h() + center_col()};
}

std::optional<std::pair<int, int>> CameraIntrinsics::project_to_pixel(const Vec3& p) const {
    const auto rc = project(p);
    if (!rc) return std::nullopt;
    const double r = std::round((*rc)[0]);
    const double c = std::round((*rc)[1]);
    if (r < 0.0 || c < 0.0 || r > res_v - 1 || c > res_h - 1) return std::nullopt;
    return std::pair{static_cast<int>(r), static_cast<int>(c)};
}

double CameraIntrinsics::pixel_area(double z) const {
    return std::tan(fov_h / res_h) * std::tan(fov_v / res_v) * z * z;
}

void CameraPose::validate() const {
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        throw std::invalid_argument("pose rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-6)
        throw std::invalid_argument("pose rotation has determinant != +1");
    if (!translation.allFinite()) throw std::invalid_argument("pose translation is not finite");
}

Mat4 CameraPose::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

CameraPose CameraPose::from_matrix(const Mat4& m) {
    CameraPose pose;
    pose.rotation = m.topLeftCorner<3, 3>();
    pose.translation = m.topRightCorner<3, 1>();
    return pose;
}

CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = z.unitOrthogonal();
    x.normalize();
    const Vec3 y = z.cross(x);
    CameraPose pose;
    pose.rotation.col(0) = x;
    pose.rotation.col(1) = y;
    pose.rotation.col(2) = z;
    pose.translation = eye;
    return pose;
}

RgbdFrame::RgbdFrame(const CameraIntrinsics& k, const CameraPose& p, int idx)
    : depth(k.res_h, k.res_v, 0.0), color(k.res_h, k.res_v), intrinsics(k), pose(p), index(idx) {}

void RgbdFrame::validate() const {
    intrinsics.validate();
    pose.validate();
    if (depth.width() != intrinsics.res_h || depth.height() != intrinsics.res_v)
        throw std::invalid_argument("depth map size does not match intrinsics");
    if (color.width() != intrinsics.res_h || color.height() != intrinsics.res_v)
        throw std::invalid_argument("color image size does not match intrinsics");
    for (double d : depth.pixels())
        if (!(d >= 0.0) || !std::isfinite(d))
            throw std::invalid_argument("depth values must be finite and >= 0");
}

void OrientedPointCloud::reserve(std::size_t n) {
    positions.reserve(n);
    normals.reserve(n);
    colors.reserve(n);
    pixel_of.reserve(n);
}

void OrientedPointCloud::push_back(const Vec3& p, const Vec3& n, Rgb c, int pixel) {
    positions.push_back(p);
    normals.push_back(n);
    colors.push_back(c);
    pixel_of.push_back(pixel);
}

double NoiseModel::sigma(double z) const {
    const double t = std::max(z, vertex) - vertex;
    return base + scale * t * t;
}

double noise_threshold(double z, const NoiseModel& model) {
    if (!(z > 0.0)) throw std::domain_error("noise_threshold: depth must be positive");
    return model.sigma(z);
}

RgbdFrame bilateral_prefilter(const RgbdFrame& frame, double spatial_sigma, double range_limit) {
    if (!(spatial_sigma > 0.0)) throw std::invalid_argument("spatial_sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * spatial_sigma));
    const int side = 2 * radius + 1;
    std::vector<double> kernel(static_cast<std::size_t>(side) * side);
    for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
            kernel[(dr + radius) * side + dc + radius] =
                std::exp(-(dr * dr + dc * dc) / (2.0 * spatial_sigma * spatial_sigma));

    RgbdFrame out = frame;
    const Image<double>& in = frame.depth;
    const int rows = in.height();
    const int cols = in.width();

#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const int r0 = std::max(0, r - radius);
        const int r1 = std::min(rows - 1, r + radius);
        for (int c = 0; c < cols; ++c) {
            const double center = in(r, c);
            if (center <= 0.0) continue;
            const int c0 = std::max(0, c - radius);
            const int c1 = std::min(cols - 1, c + radius);
            double sum = 0.0;
            double weight = 0.0;
            for (int rr = r0; rr <= r1; ++rr) {
                const double* row = &in(rr, 0);
                const double* krow = &kernel[(rr - r + radius) * side + radius - c];
                for (int cc = c0; cc <= c1; ++cc) {
                    const double d = row[cc];
                    if (d <= 0.0 || std::abs(d - center) > range_limit) continue;
                    sum += krow[cc] * d;
                    weight += krow[cc];
                }
            }
            out.depth(r, c) = sum / weight;
        }
    }
    return out;
}

OrientedPointCloud estimate_normals(const RgbdFrame& frame, double max_depth_jump) {
    const auto& k = frame.intrinsics;
    const Image<double>& depth = frame.depth;
    const int rows = depth.height();
    const int cols = depth.width();

    // Per-row buffers keep the output order independent of thread scheduling.
    std::vector<OrientedPointCloud> per_row(static_cast<std::size_t>(std::max(rows, 0)));

#pragma omp parallel for schedule(static)
    for (int r = 1; r < rows - 1; ++r) {
        auto& out = per_row[r];
        for (int c = 1; c < cols - 1; ++c) {
            const double z = depth(r, c);
            if (z <= 0.0) continue;
            const double zl = depth(r, c - 1), zr = depth(r, c + 1);
            const double zu = depth(r - 1, c), zd = depth(r + 1, c);
            if (zl <= 0.0 || zr <= 0.0 || zu <= 0.0 || zd <= 0.0) continue;
            if (std::abs(zl - z) > max_depth_jump || std::abs(zr - z) > max_depth_jump ||
                std::abs(zu - z) > max_depth_jump || std::abs(zd - z) > max_depth_jump)
                continue;

            const Vec3 p = k.unproject(r, c, z);
            const Vec3 dx = k.unproject(r, c + 1, zr) - k.unproject(r, c - 1, zl);
            const Vec3 dy = k.unproject(r + 1, c, zd) - k.unproject(r - 1, c, zu);
            Vec3 n = dx.cross(dy);
            const double len = n.norm();
            if (len <= 1e-15) continue;
            n /= len;
            const double facing = n.dot(p.normalized());
            if (std::abs(facing) < 1e-6) continue;
            if (facing > 0.0) n = -n;
            out.push_back(p, n, frame.color(r, c), r * cols + c);
        }
    }

    OrientedPointCloud cloud;
    std::size_t total = 0;
    for (const auto& row : per_row) total += row.size();
    cloud.reserve(total);
    for (auto& row : per_row) {
        cloud.positions.insert(cloud.positions.end(), row.positions.begin(), row.positions.end());
        cloud.normals.insert(cloud.normals.end(), row.normals.begin(), row.normals.end());
        cloud.colors.insert(cloud.colors.end(), row.colors.begin(), row.colors.end());
        cloud.pixel_of.insert(cloud.pixel_of.end(), row.pixel_of.begin(), row.pixel_of.end());
    }
    return cloud;
}

std::optional<Vec3> unproject(const RgbdFrame& frame, int row, int col) {
    if (!frame.depth.contains(row, col)) return std::nullopt;
    const double z = frame.depth(row, col);
    if (!(z > 0.0)) return std::nullopt;
    return frame.intrinsics.unproject(row, col, z);
}

}  // namespace shapeproxy
