#include "shapeproxy/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <png.h>

namespace shapeproxy {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DatasetError("cannot open " + path.string());
    return f;
}

/// Decodes any PNG into rows of `channels` samples with `depth` bits each.
std::vector<std::vector<std::uint8_t>> read_png_rows(const fs::path& path, int want_channels, int want_depth,
                                                     int& width, int& height) {
    FilePtr f = open_or_throw(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DatasetError("libpng initialisation failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DatasetError("malformed PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (want_channels == 3 && (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA))
        png_set_gray_to_rgb(png);
    if (want_channels == 1 && (color_type & PNG_COLOR_MASK_COLOR)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DatasetError("expected a grayscale PNG: " + path.string());
    }
    if (want_depth == 8 && bit_depth == 16) png_set_strip_16(png);
    if (want_depth == 16 && bit_depth < 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DatasetError("expected a 16-bit PNG: " + path.string());
    }
    if (want_depth == 16) png_set_swap(png);  // host little-endian samples
    png_read_update_info(png, info);

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::vector<std::uint8_t>> rows(height, std::vector<std::uint8_t>(rowbytes));
    std::vector<png_bytep> ptrs(height);
    for (int r = 0; r < height; ++r) ptrs[r] = rows[r].data();
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return rows;
}

void write_png_rows(const fs::path& path, int width, int height, int color_type, int bit_depth,
                    const std::vector<std::vector<std::uint8_t>>& rows) {
    FilePtr f = open_or_throw(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed writing PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    for (const auto& row : rows) png_write_row(png, const_cast<png_bytep>(row.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

fs::path indexed(const fs::path& dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", index);
    return dir / name;
}

}  // namespace

Image<std::uint16_t> read_png16(const fs::path& path) {
    int w = 0, h = 0;
    const auto rows = read_png_rows(path, 1, 16, w, h);
    Image<std::uint16_t> img(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            img(r, c) = static_cast<std::uint16_t>(rows[r][2 * c] | (rows[r][2 * c + 1] << 8));
    return img;
}

void write_png16(const fs::path& path, const Image<std::uint16_t>& image) {
    std::vector<std::vector<std::uint8_t>> rows(image.height(), std::vector<std::uint8_t>(2 * image.width()));
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
            rows[r][2 * c] = static_cast<std::uint8_t>(image(r, c) & 0xff);
            rows[r][2 * c + 1] = static_cast<std::uint8_t>(image(r, c) >> 8);
        }
    }
    write_png_rows(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 16, rows);
}

Image<Rgb> read_png_rgb(const fs::path& path) {
    int w = 0, h = 0;
    const auto rows = read_png_rows(path, 3, 8, w, h);
    Image<Rgb> img(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img(r, c) = {rows[r][3 * c], rows[r][3 * c + 1], rows[r][3 * c + 2]};
    return img;
}

void write_png_rgb(const fs::path& path, const Image<Rgb>& image) {
    std::vector<std::vector<std::uint8_t>> rows(image.height(), std::vector<std::uint8_t>(3 * image.width()));
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
            const Rgb& p = image(r, c);
            rows[r][3 * c] = p.r;
            rows[r][3 * c + 1] = p.g;
            rows[r][3 * c + 2] = p.b;
        }
    }
    write_png_rows(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, rows);
}

Image<std::uint16_t> quantize_depth(const Image<double>& depth, double depth_scale) {
    Image<std::uint16_t> out(depth.width(), depth.height(), 0);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double d = depth[i];
        if (!(d > 0.0)) continue;
        out[i] = static_cast<std::uint16_t>(std::clamp(std::round(d / depth_scale), 0.0, 65535.0));
    }
    return out;
}

Image<double> dequantize_depth(const Image<std::uint16_t>& raw, double depth_scale) {
    Image<double> out(raw.width(), raw.height(), 0.0);
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] * depth_scale;
    return out;
}

CameraIntrinsics read_intrinsics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("missing intrinsics file " + path.string());
    CameraIntrinsics k;
    if (!(in >> k.fov_h >> k.fov_v >> k.res_h >> k.res_v >> k.depth_scale))
        throw DatasetError("malformed intrinsics file " + path.string() +
                           " (expected: fov_h fov_v res_h res_v depth_scale)");
    try {
        k.validate();
    } catch (const std::invalid_argument& e) {
        throw DatasetError("invalid intrinsics in " + path.string() + ": " + e.what());
    }
    return k;
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& k) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17) << k.fov_h << ' ' << k.fov_v << ' ' << k.res_h << ' ' << k.res_v << ' '
        << k.depth_scale << '\n';
}

std::vector<CameraPose> read_poses(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("missing pose file " + path.string());
    std::vector<CameraPose> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        std::istringstream ls(line);
        Mat4 m;
        for (int i = 0; i < 16; ++i)
            if (!(ls >> m(i / 4, i % 4)))
                throw DatasetError("malformed pose on line " + std::to_string(lineno) + " of " + path.string());
        CameraPose pose = CameraPose::from_matrix(m);
        try {
            pose.validate();
        } catch (const std::invalid_argument& e) {
            throw DatasetError("invalid pose on line " + std::to_string(lineno) + " of " + path.string() + ": " +
                               e.what());
        }
        poses.push_back(pose);
    }
    return poses;
}

void write_poses(const fs::path& path, const std::vector<CameraPose>& poses) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17);
    for (const auto& p : poses) {
        const Mat4 m = p.matrix();
        for (int i = 0; i < 16; ++i) out << m(i / 4, i % 4) << (i == 15 ? '\n' : ' ');
    }
}

fs::path Dataset::depth_path(const fs::path& root, std::size_t index) { return indexed(root / "depth", index); }
fs::path Dataset::color_path(const fs::path& root, std::size_t index) { return indexed(root / "color", index); }

Dataset::Dataset(fs::path root) : root_(std::move(root)) {
    if (!fs::is_directory(root_)) throw DatasetError("dataset directory not found: " + root_.string());
    intrinsics_ = read_intrinsics(root_ / "intrinsics.txt");
    poses_ = read_poses(root_ / "poses.txt");
    for (const char* sub : {"depth", "color"})
        if (!fs::is_directory(root_ / sub)) throw DatasetError("missing directory " + (root_ / sub).string());
    for (std::size_t i = 0; i < poses_.size(); ++i) {
        if (!fs::exists(depth_path(root_, i))) throw DatasetError("missing depth image " + depth_path(root_, i).string());
        if (!fs::exists(color_path(root_, i))) throw DatasetError("missing color image " + color_path(root_, i).string());
    }
    auto count_png = [](const fs::path& dir) {
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".png") ++n;
        return n;
    };
    const std::size_t depth_n = count_png(root_ / "depth");
    const std::size_t color_n = count_png(root_ / "color");
    if (depth_n != poses_.size() || color_n != poses_.size())
        throw DatasetError("frame count mismatch: " + std::to_string(depth_n) + " depth, " + std::to_string(color_n) +
                           " color, " + std::to_string(poses_.size()) + " poses in " + (root_ / "poses.txt").string());
}

RgbdFrame Dataset::load(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("dataset frame index out of range");
    RgbdFrame frame(intrinsics_, poses_[index], static_cast<int>(index));
    const fs::path dp = depth_path(root_, index);
    const fs::path cp = color_path(root_, index);
    const auto raw = read_png16(dp);
    if (raw.width() != intrinsics_.res_h || raw.height() != intrinsics_.res_v)
        throw DatasetError("depth image size does not match intrinsics: " + dp.string());
    frame.depth = dequantize_depth(raw, intrinsics_.depth_scale);
    frame.color = read_png_rgb(cp);
    if (frame.color.width() != intrinsics_.res_h || frame.color.height() != intrinsics_.res_v)
        throw DatasetError("color image size does not match intrinsics: " + cp.string());
    return frame;
}

void write_frame_images(const fs::path& root, const RgbdFrame& frame, std::size_t index) {
    fs::create_directories(root / "depth");
    fs::create_directories(root / "color");
    write_png16(Dataset::depth_path(root, index), quantize_depth(frame.depth, frame.intrinsics.depth_scale));
    write_png_rgb(Dataset::color_path(root, index), frame.color);
}

void write_dataset(const fs::path& root, const std::vector<RgbdFrame>& frames) {
    fs::create_directories(root);
    std::vector<CameraPose> poses;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        write_frame_images(root, frames[i], i);
        poses.push_back(frames[i].pose);
    }
    write_intrinsics(root / "intrinsics.txt", frames.empty() ? CameraIntrinsics{} : frames.front().intrinsics);
    write_poses(root / "poses.txt", poses);
}

void write_point_cloud(const fs::path& path, const OrientedPointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property float nx\nproperty float ny\nproperty float nz\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    out << std::setprecision(9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        const Vec3& n = cloud.normals[i];
        const Rgb c = i < cloud.colors.size() ? cloud.colors[i] : Rgb{};
        out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' ' << n.z() << ' '
            << int(c.r) << ' ' << int(c.g) << ' ' << int(c.b) << '\n';
    }
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace shapeproxy
