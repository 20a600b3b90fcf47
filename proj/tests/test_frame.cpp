#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "shapeproxy/frame.hpp"

using namespace shapeproxy;
using namespace testing_helpers;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Direct summation with the documented kernel: radius ceil(3 sigma), Gaussian
// spatial weights, neighbors beyond the range limit or invalid ignored.
double oracle_prefilter(const Image<double>& d, int r, int c, double sigma, double range) {
    if (d(r, c) <= 0.0) return d(r, c);
    const int rad = static_cast<int>(std::ceil(3 * sigma));
    double s = 0, w = 0;
    for (int y = r - rad; y <= r + rad; ++y)
        for (int x = c - rad; x <= c + rad; ++x) {
            if (!d.contains(y, x)) continue;
            const double v = d(y, x);
            if (v <= 0.0 || std::abs(v - d(r, c)) > range) continue;
            const double k = std::exp(-((y - r) * (y - r) + (x - c) * (x - c)) / (2 * sigma * sigma));
            s += k * v;
            w += k;
        }
    return s / w;
}

}  // namespace

TEST(Intrinsics, PixelAreaAtEightMeters) {
    CameraIntrinsics k;
    EXPECT_NEAR(k.pixel_area(8.0), 0.00068539, 1e-8);
    EXPECT_NEAR(k.pixel_area(8.0), 6.853940878659144e-4, 1e-15);
}

TEST(Intrinsics, ValidationRejectsBadFields) {
    CameraIntrinsics k;
    k.fov_h = 0.0;
    EXPECT_THROW(k.validate(), std::invalid_argument);
    k = {};
    k.res_v = 0;
    EXPECT_THROW(k.validate(), std::invalid_argument);
    k = {};
    k.depth_scale = -1.0;
    EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(Intrinsics, CenterPixelUnprojectsOnAxis) {
    CameraIntrinsics k;
    k.res_h = 321;
    k.res_v = 241;
    const Vec3 p = k.unproject(120, 160, 2.0);
    EXPECT_NEAR(p.x(), 0.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(p.z(), 2.0);
}

TEST(Intrinsics, CornerPixelLiesOnFrustumBoundary) {
    CameraIntrinsics k;
    const Vec3 p = k.unproject(0, 0, 3.0);
    EXPECT_NEAR(std::atan2(std::abs(p.x()), p.z()), 30.0 * kDeg, 1e-6);
    EXPECT_NEAR(std::atan2(std::abs(p.y()), p.z()), 22.5 * kDeg, 1e-6);
    const Vec3 q = k.unproject(k.res_v - 1, k.res_h - 1, 3.0);
    EXPECT_NEAR(std::atan2(q.x(), q.z()), 30.0 * kDeg, 1e-6);
    EXPECT_NEAR(std::atan2(q.y(), q.z()), 22.5 * kDeg, 1e-6);
}

TEST(Intrinsics, ProjectInvertsUnproject) {
    CameraIntrinsics k;
    for (int r = 0; r < k.res_v; r += 17)
        for (int c = 0; c < k.res_h; c += 23) {
            const auto px = k.project_to_pixel(k.unproject(r, c, 1.7));
            ASSERT_TRUE(px);
            EXPECT_EQ(px->first, r);
            EXPECT_EQ(px->second, c);
        }
    EXPECT_FALSE(k.project(Vec3(0, 0, -1)));
}

TEST(Pose, LookAtIsOrthonormalAndRoundTrips) {
    const CameraPose pose = CameraPose::look_at(Vec3(3, -2, 1.5), Vec3(0, 0, 0.5), Vec3::UnitZ());
    EXPECT_NO_THROW(pose.validate());
    EXPECT_NEAR(pose.rotation.determinant(), 1.0, 1e-12);
    const Vec3 p(0.3, -0.7, 2.0);
    EXPECT_LT((pose.to_camera(pose.to_world(p)) - p).norm(), 1e-12);
    const CameraPose again = CameraPose::from_matrix(pose.matrix());
    EXPECT_LT((again.rotation - pose.rotation).norm(), 1e-12);
    // Image rows point away from up.
    EXPECT_LT(pose.direction_to_world(Vec3::UnitY()).z(), 0.0);
}

TEST(Pose, RejectsNonRotation) {
    CameraPose pose;
    pose.rotation(0, 0) = 2.0;
    EXPECT_THROW(pose.validate(), std::invalid_argument);
    pose.rotation = Mat3::Identity();
    pose.rotation(2, 2) = -1.0;
    EXPECT_THROW(pose.validate(), std::invalid_argument);
}

TEST(Noise, AxialModelValues) {
    EXPECT_NEAR(noise_threshold(1.0), 0.001884, 1e-12);
    EXPECT_NEAR(noise_threshold(0.4), 0.0012, 1e-15);
    EXPECT_NEAR(noise_threshold(0.2), 0.0012, 1e-15);
    EXPECT_THROW(noise_threshold(0.0), std::domain_error);
    EXPECT_THROW(noise_threshold(-1.0), std::domain_error);
    double prev = 0.0;
    for (double z = 0.05; z < 10.0; z += 0.05) {
        const double a = noise_threshold(z);
        EXPECT_GE(a, prev);
        prev = a;
    }
}

TEST(Prefilter, ConstantFrameUnchanged) {
    const RgbdFrame f = constant_frame(2.0, small_camera());
    const RgbdFrame g = bilateral_prefilter(f);
    for (std::size_t i = 0; i < f.depth.size(); ++i) EXPECT_NEAR(g.depth[i], 2.0, 1e-12);
}

TEST(Prefilter, StepEdgeDoesNotBleed) {
    RgbdFrame f = constant_frame(1.0, small_camera());
    for (int r = 0; r < f.depth.height(); ++r)
        for (int c = f.depth.width() / 2; c < f.depth.width(); ++c) f.depth(r, c) = 1.4;
    const RgbdFrame g = bilateral_prefilter(f, 2.0, 0.20);
    for (int r = 0; r < f.depth.height(); ++r) {
        EXPECT_NEAR(g.depth(r, f.depth.width() / 2 - 1), 1.0, 1e-12);
        EXPECT_NEAR(g.depth(r, f.depth.width() / 2), 1.4, 1e-12);
    }
}

TEST(Prefilter, MatchesDirectSummation) {
    RgbdFrame f = constant_frame(1.0, small_camera(40, 30));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    for (auto& d : f.depth.pixels()) d = uni(rng) < 0.6 ? 0.0 : uni(rng);
    const RgbdFrame g = bilateral_prefilter(f, 1.5, 0.2);
    for (int r = 0; r < f.depth.height(); ++r)
        for (int c = 0; c < f.depth.width(); ++c)
            EXPECT_NEAR(g.depth(r, c), oracle_prefilter(f.depth, r, c, 1.5, 0.2), 1e-12);
}

TEST(Prefilter, ReducesNoiseVariance) {
    // 9x9 kernel (sigma 4/3) over i.i.d. noise at 1 m, 1000 trials of the center pixel.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.005);
    const CameraIntrinsics k = small_camera(9, 9);
    double in_var = 0, out_var = 0;
    for (int t = 0; t < 1000; ++t) {
        RgbdFrame f = constant_frame(1.0, k);
        for (auto& d : f.depth.pixels()) d += noise(rng);
        const double before = f.depth(4, 4) - 1.0;
        const double after = bilateral_prefilter(f, 4.0 / 3.0, 0.2).depth(4, 4) - 1.0;
        in_var += before * before;
        out_var += after * after;
    }
    EXPECT_LT(out_var, in_var);
}

TEST(Prefilter, InvalidPixelsStayInvalid) {
    RgbdFrame f = constant_frame(2.0, small_camera());
    f.depth(10, 10) = 0.0;
    EXPECT_EQ(bilateral_prefilter(f).depth(10, 10), 0.0);
    RgbdFrame empty = constant_frame(0.0, small_camera());
    EXPECT_EQ(bilateral_prefilter(empty).depth, empty.depth);
}

TEST(Normals, FrontoParallelPlaneFacesCamera) {
    const RgbdFrame f = constant_frame(2.0, small_camera());
    const OrientedPointCloud cloud = estimate_normals(f);
    ASSERT_FALSE(cloud.empty());
    for (const auto& n : cloud.normals) EXPECT_LT((n - Vec3(0, 0, -1)).norm(), 1e-4);
}

TEST(Normals, TiltedPlaneMatchesAnalyticNormal) {
    // Plane through (0, 0, 2) with normal (sin 45, 0, -cos 45) in camera space.
    const Vec3 n_true = Vec3(std::sin(45 * kDeg), 0, -std::cos(45 * kDeg));
    RgbdFrame f = constant_frame(0.0, small_camera());
    const Vec3 p0(0, 0, 2);
    for (int r = 0; r < f.depth.height(); ++r)
        for (int c = 0; c < f.depth.width(); ++c) {
            const Vec3 ray = f.intrinsics.unproject(r, c, 1.0);
            f.depth(r, c) = p0.dot(n_true) / ray.dot(n_true);
        }
    const OrientedPointCloud cloud = estimate_normals(f, 1.0);
    ASSERT_GT(cloud.size(), 1000u);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        EXPECT_LT(std::acos(std::min(1.0, cloud.normals[i].dot(n_true))), 0.5 * kDeg);
        EXPECT_NEAR(cloud.normals[i].norm(), 1.0, 1e-6);
        EXPECT_LT(cloud.normals[i].dot(cloud.positions[i].normalized()), 0.0);
    }
}

TEST(Normals, IsolatedPixelProducesNoPoint) {
    RgbdFrame f = constant_frame(0.0, small_camera());
    f.depth(20, 20) = 1.5;
    EXPECT_TRUE(estimate_normals(f).empty());
}

TEST(Unproject, InvalidDepthGivesNothing) {
    RgbdFrame f = constant_frame(2.0, small_camera());
    f.depth(3, 4) = 0.0;
    EXPECT_FALSE(unproject(f, 3, 4));
    EXPECT_FALSE(unproject(f, -1, 4));
    ASSERT_TRUE(unproject(f, 5, 5));
    EXPECT_DOUBLE_EQ(unproject(f, 5, 5)->z(), 2.0);
}
