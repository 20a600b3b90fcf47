#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shapeproxy/shape.hpp"

using namespace shapeproxy;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec3 v(g(rng), g(rng), g(rng));
    return v.normalized();
}

ShapeModel tilted_cylinder(double r) {
    return ShapeModel::cylinder(Vec3(0.3, -0.2, 1.0), Vec3(1, 1, 2).normalized(), r, Vec3::UnitX());
}

}  // namespace

TEST(Parameterize, PlaneOriginIsZero) {
    const ShapeModel s = ShapeModel::plane(Vec3(1, 2, 3), Vec3::UnitX(), Vec3::UnitY());
    const Vec2 uv = parameterize(s, Vec3(1, 2, 3));
    EXPECT_EQ(uv, Vec2(0, 0));
}

TEST(Parameterize, CylinderExample) {
    const ShapeModel s = ShapeModel::cylinder(Vec3::Zero(), Vec3::UnitZ(), 1.0, Vec3::UnitX());
    const Vec2 uv = parameterize(s, s.axis_x + 2.0 * s.axis());
    EXPECT_NEAR(uv.x(), kPi, 1e-12);
    EXPECT_NEAR(uv.y(), 2.0, 1e-12);
}

TEST(Parameterize, SphereZenithEquatorAndSouthPole) {
    const ShapeModel s = ShapeModel::sphere(Vec3(1, 1, 1), 1.0);
    const Vec2 zenith = parameterize(s, s.origin + s.axis());
    EXPECT_NEAR(zenith.x(), 0.0, 1e-12);
    EXPECT_NEAR(zenith.y(), 0.0, 1e-12);
    const Vec2 eq = parameterize(s, s.origin + s.axis_x);
    EXPECT_NEAR(eq.x(), kPi / 2, 1e-12);
    EXPECT_NEAR(eq.y(), 0.0, 1e-12);
    const Vec2 south = parameterize(s, s.origin - s.axis());
    EXPECT_NEAR(south.x(), kPi / 2, 1e-12);
    EXPECT_NEAR(south.y(), kPi / 2, 1e-12);
    EXPECT_THROW(parameterize(s, s.origin), std::domain_error);
}

TEST(Parameterize, PlaneIsIsometry) {
    const ShapeModel s = ShapeModel::plane(Vec3(0.1, 0.2, 0.3), Vec3(1, 1, 0).normalized(), Vec3(0, 0, 1));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-5, 5);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 a = unparameterize(s, uni(rng), uni(rng)).point;
        const Vec3 b = unparameterize(s, uni(rng), uni(rng)).point;
        EXPECT_NEAR((parameterize(s, a) - parameterize(s, b)).norm(), (a - b).norm(), 1e-9);
    }
}

TEST(Unparameterize, PlaneLinearity) {
    const ShapeModel s = ShapeModel::plane(Vec3(1, 0, 0), Vec3::UnitY(), Vec3::UnitZ());
    const SurfacePoint sp = unparameterize(s, 0.3, 0.7);
    EXPECT_LT((sp.point - (s.origin + 0.3 * s.axis_x + 0.7 * s.axis_y)).norm(), 1e-15);
    EXPECT_LT((sp.normal - s.axis()).norm(), 1e-15);
}

TEST(Unparameterize, CylinderRoundTrip) {
    const ShapeModel s = tilted_cylinder(0.7);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2 * kPi * 0.7), v(-2, 2);
    for (int i = 0; i < 1000; ++i) {
        const SurfacePoint sp = unparameterize(s, u(rng), v(rng));
        EXPECT_NEAR(s.signed_distance(sp.point), 0.0, 1e-9);
        const Vec2 uv = parameterize(s, sp.point);
        const SurfacePoint back = unparameterize(s, uv.x(), uv.y());
        EXPECT_LT((back.point - sp.point).norm(), 1e-6);
        EXPECT_NEAR(sp.normal.dot(s.normal_at(sp.point)), 1.0, 1e-9);
    }
    EXPECT_THROW(unparameterize(s, -0.5, 0.0), std::domain_error);
}

TEST(Unparameterize, SphereDirectionsRoundTrip) {
    const double r = 0.8;
    const ShapeModel s = ShapeModel::sphere(Vec3(-1, 2, 0.5), r);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100000; ++i) {
        const Vec3 d = random_unit(rng);
        const Vec2 uv = parameterize(s, s.origin + r * d);
        ASSERT_LE(std::abs(uv.x()), kPi * r / 2 + 1e-12);
        ASSERT_LE(std::abs(uv.y()), kPi * r / 2 + 1e-12);
        const SurfacePoint sp = unparameterize(s, uv.x(), uv.y());
        const Vec3 back = (sp.point - s.origin).normalized();
        ASSERT_LT(std::acos(std::clamp(back.dot(d), -1.0, 1.0)), 1e-5);
    }
    EXPECT_THROW(unparameterize(s, kPi * r, 0.0), std::domain_error);
}

TEST(Unparameterize, SphereOctantEdgeIsOnEquator) {
    const ShapeModel s = ShapeModel::sphere(Vec3::Zero(), 1.0);
    const SurfacePoint edge = unparameterize(s, kPi / 2, 0.0);
    EXPECT_LT((edge.point - s.axis_x).norm(), 1e-6);
    // Approaching the edge from the upper and the lower octant gives the same point.
    const SurfacePoint above = unparameterize(s, kPi / 2 - 1e-9, 0.0);
    const SurfacePoint below = unparameterize(s, kPi / 2 - 1e-9, 2e-9);
    EXPECT_LT((above.point - below.point).norm(), 1e-6);
}

TEST(ProjectAlongRay, Examples) {
    const ShapeModel plane = ShapeModel::plane(Vec3(0, 0, 2), Vec3::UnitX(), Vec3::UnitY());
    const auto q = project_along_ray(plane, Vec3::Zero(), Vec3(0.1, 0, 1.9));
    ASSERT_TRUE(q);
    EXPECT_NEAR(q->x(), 0.10526315789473685, 1e-12);
    EXPECT_NEAR(q->y(), 0.0, 1e-12);
    EXPECT_NEAR(q->z(), 2.0, 1e-12);

    const Vec3 on(0.4, -0.3, 2.0);
    EXPECT_LT((*project_along_ray(plane, Vec3::Zero(), on) - on).norm(), 1e-12);

    const ShapeModel sphere = ShapeModel::sphere(Vec3(0, 0, 5), 1.0);
    EXPECT_FALSE(project_along_ray(sphere, Vec3::Zero(), Vec3(1.2, 0, 5)));
    const auto hit = project_along_ray(sphere, Vec3::Zero(), Vec3(0, 0, 3));
    ASSERT_TRUE(hit);
    EXPECT_NEAR(hit->z(), 4.0, 1e-12);

    const ShapeModel cyl = tilted_cylinder(0.5);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(-3, 3);
    for (int i = 0; i < 200; ++i) {
        const Vec3 cam(uni(rng), uni(rng), uni(rng));
        const Vec3 target = unparameterize(cyl, std::abs(uni(rng)) / 3 * kPi, uni(rng)).point;
        const auto p = project_along_ray(cyl, cam, target + 0.01 * (target - cam).normalized());
        if (p) {
            EXPECT_LT(std::abs(cyl.signed_distance(*p)), 1e-9);
        }
    }
}

TEST(Grid, CellOfExamples) {
    GridSpec spec;
    EXPECT_EQ(spec.cell_of(0.12, -0.03), (CellKey{2, -1}));
    for (double u = 0.05; u < 0.0999; u += 0.001)
        for (double v = 0.0; v < 0.0499; v += 0.001) EXPECT_EQ(spec.cell_of(u, v), (CellKey{1, 0}));

    const ShapeModel cyl = ShapeModel::cylinder(Vec3::Zero(), Vec3::UnitZ(), 1.0);
    const GridSpec cs = GridSpec::for_shape(cyl);
    EXPECT_EQ(cs.cell_of(2 * kPi - 1e-9, 0).i, cs.i_hi());
    EXPECT_EQ(cs.cell_of(2 * kPi + 1e-9, 0).i, 0);
    EXPECT_EQ(cs.cell_of(2 * kPi, 0).i, 0);
}

TEST(Grid, SphereDomainIsFixed) {
    const ShapeModel s = ShapeModel::sphere(Vec3::Zero(), 2.0);
    const GridSpec spec = GridSpec::for_shape(s);
    EXPECT_NEAR(spec.u_min, -kPi, 1e-12);
    EXPECT_NEAR(spec.v_max, kPi, 1e-12);
    EXPECT_TRUE(spec.fixed_u && spec.fixed_v);
    // The upper edge of the square belongs to the last cell.
    EXPECT_EQ(spec.cell_of(kPi, kPi), (CellKey{spec.i_hi(), spec.j_hi()}));
}

TEST(ShapeModel, ValidationAndDistances) {
    ShapeModel bad = ShapeModel::plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitX());
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    ShapeModel s = ShapeModel::sphere(Vec3::Zero(), 1.0);
    s.radius = -1;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    const ShapeModel sphere = ShapeModel::sphere(Vec3(1, 0, 0), 0.5);
    EXPECT_NEAR(sphere.signed_distance(Vec3(2, 0, 0)), 0.5, 1e-15);
    EXPECT_NEAR(sphere.signed_distance(Vec3(1, 0, 0)), -0.5, 1e-15);
}
