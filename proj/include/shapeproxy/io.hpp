#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/image.hpp"

namespace shapeproxy {

/// Missing or malformed input; the message names the offending file.
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Image<std::uint16_t> read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const Image<std::uint16_t>& image);
Image<Rgb> read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image<Rgb>& image);

/// Depth in meters to stored units (rounded, saturated to 16 bits) and back.
Image<std::uint16_t> quantize_depth(const Image<double>& depth, double depth_scale);
Image<double> dequantize_depth(const Image<std::uint16_t>& raw, double depth_scale);

/// Recorded stream:
///   depth/%06d.png   16-bit depth in depth_scale units (0 = invalid)
///   color/%06d.png   8-bit RGB
///   intrinsics.txt   fov_h fov_v res_h res_v depth_scale (radians, pixels, meters)
///   poses.txt        one camera-to-world 4x4 matrix per line, row-major
class Dataset {
public:
    /// Validates the layout; throws DatasetError naming the offending file.
    explicit Dataset(std::filesystem::path root);

    std::size_t size() const { return poses_.size(); }
    const CameraIntrinsics& intrinsics() const { return intrinsics_; }
    const std::vector<CameraPose>& poses() const { return poses_; }
    RgbdFrame load(std::size_t index) const;

    static std::filesystem::path depth_path(const std::filesystem::path& root, std::size_t index);
    static std::filesystem::path color_path(const std::filesystem::path& root, std::size_t index);

private:
    std::filesystem::path root_;
    CameraIntrinsics intrinsics_;
    std::vector<CameraPose> poses_;
};

CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k);
std::vector<CameraPose> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<CameraPose>& poses);

/// Writes intrinsics, poses and every frame into `root`.
void write_dataset(const std::filesystem::path& root, const std::vector<RgbdFrame>& frames);
/// Writes one frame's depth and color images.
void write_frame_images(const std::filesystem::path& root, const RgbdFrame& frame, std::size_t index);

/// ASCII PLY with positions, normals and colors.
void write_point_cloud(const std::filesystem::path& path, const OrientedPointCloud& cloud);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace shapeproxy
