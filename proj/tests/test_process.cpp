#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "shapeproxy/process.hpp"

using namespace shapeproxy;
using namespace testing_helpers;

namespace {

// Fronto-parallel plane z = 2 seen from the origin, normal pointing away from the camera.
ShapeModel fronto_plane() { return ShapeModel::plane(Vec3(0, 0, 2), Vec3::UnitX(), Vec3::UnitY()); }

SceneState fronto_state(double d = 0.0) {
    SceneState s;
    s.intrinsics = small_camera();
    s.proxies.push_back(plane_proxy(1, fronto_plane(), -30, 30, -30, 30, d));
    return s;
}

RgbdFrame noisy_frame(double z, double sigma, std::uint64_t seed) {
    RgbdFrame f = constant_frame(z, small_camera());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& d : f.depth.pixels()) d += g(rng);
    return f;
}

InlierMarks all_marked(const RgbdFrame& f, std::uint32_t id) { return InlierMarks(f.depth.width(), f.depth.height(), id); }

Image<std::uint8_t> full_mask(int w, int h) { return Image<std::uint8_t>(w, h, 1); }

void punch(Image<std::uint8_t>& m, int r0, int c0, int rows, int cols) {
    for (int r = r0; r < r0 + rows; ++r)
        for (int c = c0; c < c0 + cols; ++c) m(r, c) = 0;
}

}  // namespace

TEST(Filter, FlatCellsSnapToTheShape) {
    const SceneState s = fronto_state();
    const RgbdFrame f = noisy_frame(2.0, 0.005, 1);
    const RgbdFrame g = filter_frame(f, s, all_marked(f, 1));
    for (int r = 0; r < f.depth.height(); ++r)
        for (int c = 0; c < f.depth.width(); ++c) {
            const Vec3 ray = f.intrinsics.unproject(r, c, 1.0);
            EXPECT_NEAR(g.depth(r, c), 2.0, 1e-9);
            EXPECT_NEAR((g.intrinsics.unproject(r, c, g.depth(r, c)) - 2.0 * ray).norm(), 0.0, 1e-9);
        }
}

TEST(Filter, OffsetCellsLandAtTheStoredDistance) {
    const RgbdFrame f = noisy_frame(2.02, 0.004, 2);
    const RgbdFrame g = filter_frame(f, fronto_state(0.02), all_marked(f, 1));
    for (double z : g.depth.pixels()) EXPECT_NEAR(z, 2.02, 1e-9);
    // Offsets within the noise level are treated as flat.
    const RgbdFrame h = filter_frame(f, fronto_state(0.003), all_marked(f, 1));
    for (double z : h.depth.pixels()) EXPECT_NEAR(z, 2.0, 1e-9);
}

TEST(Filter, MultimodalAndUnmarkedPixelsAreUntouched) {
    SceneState s = fronto_state();
    for (auto& [key, cell] : s.proxies[0].cells)
        for (int i = 0; i < 40; ++i) cell.hist.insert(0.05, 0.003);
    for (auto& [key, cell] : s.proxies[0].cells) cell.hist.update_modes();
    const RgbdFrame f = noisy_frame(2.0, 0.005, 3);
    const RgbdFrame g = filter_frame(f, s, all_marked(f, 1));
    EXPECT_EQ(g.depth, f.depth);

    InlierMarks none(f.depth.width(), f.depth.height(), 0);
    EXPECT_EQ(filter_frame(f, fronto_state(), none).depth, f.depth);
    InlierMarks unknown(f.depth.width(), f.depth.height(), 99);
    EXPECT_EQ(filter_frame(f, fronto_state(), unknown).depth, f.depth);
    EXPECT_THROW(filter_frame(f, s, InlierMarks(3, 3, 1)), std::invalid_argument);
}

TEST(Filter, ReducesErrorAgainstTruth) {
    const RgbdFrame f = noisy_frame(2.0, 0.005, 4);
    FilterParams p;
    p.cross_bilateral = true;
    const RgbdFrame g = filter_frame(f, fronto_state(), all_marked(f, 1), p);
    double before = 0, after = 0;
    for (std::size_t i = 0; i < f.depth.size(); ++i) {
        before += (f.depth[i] - 2.0) * (f.depth[i] - 2.0);
        after += (g.depth[i] - 2.0) * (g.depth[i] - 2.0);
    }
    EXPECT_LT(after, 1e-12 * before + 1e-18);
}

TEST(CrossBilateral, DoesNotMixProxies) {
    RgbdFrame f = constant_frame(1.0, small_camera());
    InlierMarks m(f.depth.width(), f.depth.height(), 1);
    for (int r = 0; r < f.depth.height(); ++r)
        for (int c = f.depth.width() / 2; c < f.depth.width(); ++c) {
            f.depth(r, c) = 2.0;
            m(r, c) = 2;
        }
    for (int r = 0; r < 5; ++r) m(r, 3) = 0, f.depth(r, 3) = 7.0;
    const RgbdFrame g = cross_bilateral(f, m, 1.5);
    EXPECT_EQ(g.depth, f.depth);
    EXPECT_THROW(cross_bilateral(f, m, 0.0), std::invalid_argument);
}

TEST(Closing, FillsHolesUpToSixCells) {
    Image<std::uint8_t> m = full_mask(30, 30);
    punch(m, 5, 5, 6, 6);
    punch(m, 15, 15, 7, 7);
    const auto c = binary_closing(m, 7);
    for (int r = 5; r < 11; ++r)
        for (int col = 5; col < 11; ++col) EXPECT_EQ(c(r, col), 1);
    EXPECT_EQ(c(18, 18), 0);
    EXPECT_THROW(binary_closing(m, 6), std::invalid_argument);
    EXPECT_THROW(binary_closing(m, 0), std::invalid_argument);
}

TEST(Closing, PeriodicColumnsWrap) {
    Image<std::uint8_t> m = full_mask(40, 20);
    punch(m, 5, 0, 4, 2);
    punch(m, 5, 38, 4, 2);
    const auto wrapped = binary_closing(m, 7, true);
    for (int r = 5; r < 9; ++r) {
        EXPECT_EQ(wrapped(r, 0), 1);
        EXPECT_EQ(wrapped(r, 39), 1);
    }
    const auto flat = binary_closing(m, 7, false);
    EXPECT_EQ(flat(6, 0), 0);
}

TEST(Closing, IsExtensiveAndIdempotent) {
    std::mt19937_64 rng(6);
    std::bernoulli_distribution on(0.7);
    Image<std::uint8_t> m(25, 25, 0);
    for (auto& v : m.pixels()) v = on(rng);
    const auto c = binary_closing(m, 3);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_GE(c[i], m[i]);
    EXPECT_EQ(binary_closing(c, 3), c);
}

TEST(FillHoles, SmallHolesCloseDoorwaysStay) {
    SceneState s;
    Proxy p = plane_proxy(1, fronto_plane(), 0, 59, 0, 59);
    for (int j = 10; j < 15; ++j)
        for (int i = 10; i < 15; ++i) p.cells.erase({i, j});
    // Doorway 16 cells wide, open at the bottom edge.
    for (int j = 0; j < 40; ++j)
        for (int i = 30; i < 46; ++i) p.cells.erase({i, j});
    s.proxies.push_back(p);
    HoleFillParams hp;
    hp.extrapolate = false;
    const HoleFillReport rep = fill_holes(s, hp);
    const Proxy& q = s.proxies[0];
    for (int j = 10; j < 15; ++j)
        for (int i = 10; i < 15; ++i) {
            ASSERT_TRUE(q.cells.count({i, j}));
            EXPECT_TRUE(q.cells.at({i, j}).filled);
            EXPECT_TRUE(q.cells.at({i, j}).emitting());
        }
    for (int j = 0; j < 36; ++j) EXPECT_FALSE(q.cells.count({38, j}) && q.cells.at({38, j}).emitting()) << j;
    EXPECT_GE(rep.closed, 25u);
}

TEST(FillHoles, ExtrapolatesWallDownToTheFloor) {
    const ShapeModel floor = ShapeModel::plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
    const ShapeModel wall = ShapeModel::plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitZ());
    auto make = [&](bool extrapolate) {
        SceneState s;
        s.proxies.push_back(plane_proxy(1, floor, 0, 39, 0, 39));
        s.proxies.push_back(plane_proxy(2, wall, 0, 39, 6, 39));
        HoleFillParams hp;
        hp.extrapolate = extrapolate;
        const HoleFillReport rep = fill_holes(s, hp);
        return std::make_pair(s, rep);
    };
    const auto [with, rep] = make(true);
    const Proxy& w = with.proxies[1];
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 6; ++j) {
            ASSERT_TRUE(w.cells.count({i, j})) << i << "," << j;
            EXPECT_TRUE(w.cells.at({i, j}).filled);
        }
    EXPECT_EQ(rep.extrapolated, 240u);
    const auto [without, rep2] = make(false);
    EXPECT_EQ(rep2.extrapolated, 0u);
    EXPECT_FALSE(without.proxies[1].cells.count({5, 0}) && without.proxies[1].cells.at({5, 0}).emitting());
}

TEST(FillHoles, ShallowDihedralIsNotExtrapolated) {
    const ShapeModel a = ShapeModel::plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
    const double t = 30.0 * std::acos(-1.0) / 180.0;
    const ShapeModel b = ShapeModel::plane(Vec3::Zero(), Vec3::UnitX(), Vec3(0, std::cos(t), std::sin(t)));
    SceneState s;
    s.proxies.push_back(plane_proxy(1, a, 0, 19, 5, 19));
    s.proxies.push_back(plane_proxy(2, b, 0, 19, 5, 19));
    HoleFillParams hp;
    hp.closing_size = 1;
    EXPECT_EQ(fill_holes(s, hp).extrapolated, 0u);
}

TEST(Resample, DensitySquaredPointsPerCell) {
    SceneState s;
    s.proxies.push_back(plane_proxy(1, fronto_plane(), 0, 2, 0, 1, 0.01));
    const OrientedPointCloud pts = resample(s, 3);
    ASSERT_EQ(pts.size(), 6u * 9u);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_NEAR(pts.positions[i].z(), 2.01, 1e-12);
        EXPECT_GE(pts.positions[i].x(), 0.0);
        EXPECT_LE(pts.positions[i].x(), 0.15);
    }
    EXPECT_THROW(resample(s, 0), std::invalid_argument);
}
