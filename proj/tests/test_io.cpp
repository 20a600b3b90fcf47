#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "helpers.hpp"
#include "shapeproxy/config.hpp"
#include "shapeproxy/io.hpp"

using namespace shapeproxy;
using namespace testing_helpers;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("shapeproxy_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<RgbdFrame> two_frames() {
    std::vector<RgbdFrame> frames;
    for (int k = 0; k < 2; ++k) {
        RgbdFrame f = constant_frame(1.0 + 0.25 * k, small_camera(16, 12),
                                     CameraPose::look_at(Vec3(k, -2, 1), Vec3(0, 0, 1), Vec3::UnitZ()));
        f.depth(3, 4) = 0.0;
        f.color(2, 2) = Rgb{1, 2, 3};
        frames.push_back(f);
    }
    return frames;
}

}  // namespace

TEST(Png, SixteenBitRoundTrip) {
    const fs::path d = temp_dir("png16");
    Image<std::uint16_t> img(7, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c) img(r, c) = static_cast<std::uint16_t>(r * 9000 + c * 17);
    img(4, 6) = 65535;
    write_png16(d / "a.png", img);
    EXPECT_EQ(read_png16(d / "a.png"), img);
    EXPECT_THROW(read_png16(d / "missing.png"), std::runtime_error);
    std::ofstream(d / "junk.png") << "not a png";
    EXPECT_THROW(read_png16(d / "junk.png"), std::runtime_error);
}

TEST(Png, RgbRoundTrip) {
    const fs::path d = temp_dir("pngrgb");
    Image<Rgb> img(3, 2);
    img(0, 0) = {255, 0, 0};
    img(1, 2) = {1, 2, 3};
    write_png_rgb(d / "c.png", img);
    EXPECT_EQ(read_png_rgb(d / "c.png"), img);
}

TEST(Depth, QuantizationRoundsAndSaturates) {
    Image<double> d(4, 1);
    d(0, 0) = 1.2344;
    d(0, 1) = 1.2346;
    d(0, 2) = 100.0;
    d(0, 3) = -1.0;
    const auto q = quantize_depth(d, 0.001);
    EXPECT_EQ(q(0, 0), 1234);
    EXPECT_EQ(q(0, 1), 1235);
    EXPECT_EQ(q(0, 2), 65535);
    EXPECT_EQ(q(0, 3), 0);
    const auto back = dequantize_depth(q, 0.001);
    EXPECT_DOUBLE_EQ(back(0, 0), 1.234);
    EXPECT_EQ(back(0, 3), 0.0);
}

TEST(Dataset, WriteReadRoundTrip) {
    const fs::path d = temp_dir("dataset");
    const auto frames = two_frames();
    write_dataset(d, frames);
    const Dataset ds(d);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_NEAR(ds.intrinsics().fov_h, frames[0].intrinsics.fov_h, 1e-15);
    EXPECT_EQ(ds.intrinsics().res_h, 16);
    for (std::size_t k = 0; k < 2; ++k) {
        const RgbdFrame f = ds.load(k);
        EXPECT_LT((f.pose.matrix() - frames[k].pose.matrix()).norm(), 1e-12);
        for (std::size_t i = 0; i < f.depth.size(); ++i) EXPECT_NEAR(f.depth[i], frames[k].depth[i], 5e-4);
        EXPECT_EQ(f.depth(3, 4), 0.0);
        EXPECT_EQ(f.color, frames[k].color);
    }
    EXPECT_EQ(Dataset::depth_path(d, 7), d / "depth" / "000007.png");
}

TEST(Dataset, MissingFilesAreNamed) {
    const fs::path d = temp_dir("broken");
    write_dataset(d, two_frames());
    fs::remove(d / "poses.txt");
    try {
        Dataset ds(d);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("poses.txt"), std::string::npos);
    }
    write_dataset(d, two_frames());
    fs::remove(Dataset::depth_path(d, 1));
    try {
        Dataset ds(d);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("000001.png"), std::string::npos);
    }
    write_dataset(d, two_frames());
    std::ofstream(d / "poses.txt") << "1 0 0\n";
    try {
        Dataset ds(d);
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("poses.txt"), std::string::npos);
    }
    EXPECT_THROW(Dataset(d / "nowhere"), DatasetError);
}

TEST(Files, IntrinsicsPosesAndBytes) {
    const fs::path d = temp_dir("files");
    CameraIntrinsics k;
    k.fov_h = 1.1;
    write_intrinsics(d / "k.txt", k);
    EXPECT_DOUBLE_EQ(read_intrinsics(d / "k.txt").fov_h, 1.1);
    const std::vector<CameraPose> poses = {CameraPose{}, CameraPose::look_at(Vec3(1, 2, 3), Vec3::Zero(), Vec3::UnitZ())};
    write_poses(d / "p.txt", poses);
    const auto back = read_poses(d / "p.txt");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].matrix(), poses[1].matrix());
    const std::vector<std::uint8_t> bytes = {0, 1, 255, 7};
    write_file(d / "b.bin", bytes);
    EXPECT_EQ(read_file(d / "b.bin"), bytes);
    EXPECT_THROW(read_file(d / "none.bin"), std::runtime_error);
}

TEST(Files, PointCloudPly) {
    const fs::path d = temp_dir("ply");
    OrientedPointCloud c;
    c.push_back(Vec3(1, 2, 3), Vec3::UnitZ(), Rgb{9, 8, 7}, -1);
    c.push_back(Vec3(4, 5, 6), Vec3::UnitX(), Rgb{1, 1, 1}, -1);
    write_point_cloud(d / "c.ply", c);
    const std::string text = slurp(d / "c.ply");
    EXPECT_EQ(text.rfind("ply\nformat ascii 1.0\n", 0), 0u);
    EXPECT_NE(text.find("element vertex 2"), std::string::npos);
    EXPECT_NE(text.find("property float nx"), std::string::npos);
}

TEST(Config, SettingsAndDegrees) {
    PipelineConfig c;
    apply_setting(c, "merge_angle_deg", "20");
    EXPECT_NEAR(c.proxy.merge_angle, 20 * std::numbers::pi / 180, 1e-15);
    apply_setting(c, "keep_threshold", "80");
    EXPECT_EQ(c.proxy.keep_threshold, 80);
    apply_setting(c, "merge", "false");
    EXPECT_FALSE(c.merge);
    apply_setting(c, "min_inlier_fraction", "0.05");
    EXPECT_DOUBLE_EQ(c.detection.min_inlier_fraction, 0.05);
    EXPECT_DOUBLE_EQ(c.residual_fraction, 0.05);
    apply_setting(c, "noise_base", "0.002");
    EXPECT_DOUBLE_EQ(c.filter.noise.base, 0.002);
    EXPECT_THROW(apply_setting(c, "no_such_key", "1"), ConfigError);
    EXPECT_THROW(apply_setting(c, "keep_threshold", "lots"), ConfigError);
    EXPECT_THROW(apply_setting(c, "merge", "maybe"), ConfigError);
    apply_overrides(c, {"seed=5", "threads=1"});
    EXPECT_EQ(c.seed, 5u);
    EXPECT_THROW(apply_overrides(c, {"seed"}), ConfigError);
}

TEST(Config, FileAndDumpRoundTrip) {
    const fs::path d = temp_dir("config");
    PipelineConfig a;
    apply_setting(a, "cell_size", "0.04");
    apply_setting(a, "purge_after", "12");
    std::ofstream(d / "a.cfg") << "# comment\n\n" << dump_config(a);
    PipelineConfig b;
    load_config(b, d / "a.cfg");
    EXPECT_EQ(dump_config(b), dump_config(a));
    EXPECT_DOUBLE_EQ(b.proxy.cell_size, 0.04);

    std::ofstream(d / "bad.cfg") << "seed = 1\nbogus = 2\n";
    try {
        load_config(b, d / "bad.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.cfg:2"), std::string::npos);
    }
    EXPECT_THROW(load_config(b, d / "none.cfg"), ConfigError);
    for (const auto& key : config_keys()) EXPECT_NE(dump_config(a).find(key + " = "), std::string::npos) << key;
}
