#include <catch_amalgamated.hpp>

#include <random>

#include "proprio/terrain_estimator.hpp"

using namespace proprio;

namespace {

SupportTriangle horizontal_triangle(double z, double prob, double scale = 2.0) {
    return make_support_triangle({-scale, -scale, z}, {scale, -scale, z}, {0.0, scale, z}, prob);
}

/// Least-squares plane z = a*x + b*y + c minimizing vertical residuals;
/// independent of the PCA path.
PlaneParams vertical_ls_plane(const std::vector<Vec3>& pts) {
    Mat3 ata = Mat3::Zero();
    Vec3 atb = Vec3::Zero();
    for (const Vec3& p : pts) {
        const Vec3 row{p.x(), p.y(), 1.0};
        ata += row * row.transpose();
        atb += row * p.z();
    }
    const Vec3 sol = ata.ldlt().solve(atb);
    PlaneParams plane{-sol(0), -sol(1), 1.0, -sol(2), false};
    plane.normalize();
    return plane;
}

}  // namespace

TEST_CASE("single full-confidence triangle writes its plane height") {
    GridMap2p5 map({-2, -2}, 0.1, 40, 40);
    const std::vector<SupportTriangle> tris = {horizontal_triangle(0.3, 1.0)};
    update_terrain(map, tris);
    int covered = 0;
    for (int iy = 0; iy < map.height(); ++iy)
        for (int ix = 0; ix < map.width(); ++ix) {
            const GridCell& c = map.cell(ix, iy);
            if (!c.valid) continue;
            ++covered;
            CHECK(c.height == Catch::Approx(0.3).margin(1e-12));
            CHECK(c.confidence == Catch::Approx(1.0).margin(1e-12));
        }
    CHECK(covered > 100);
}

TEST_CASE("confidence-weighted fusion of prior and one covering plane") {
    GridMap2p5 map({-2, -2}, 0.1, 40, 40);
    const auto idx = map.cell_index_at({0.0, 0.0});
    REQUIRE(idx);
    map.set_cell(idx->first, idx->second, 0.0, 0.5);

    const std::vector<SupportTriangle> tris = {horizontal_triangle(0.1, 0.5)};
    update_terrain(map, tris);
    // (0.5*0.0 + 0.5*0.1) / (0.5 + 0.5)
    CHECK(map.cell(idx->first, idx->second).height == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("cells outside all triangles are bit-identical after update") {
    GridMap2p5 map({-2, -2}, 0.1, 40, 40);
    map.set_cell(1, 1, 0.7, 0.3);  // far corner, outside the triangle below
    const std::vector<SupportTriangle> tris = {horizontal_triangle(0.2, 0.9, 0.5)};
    const GridMap2p5 before = map;
    update_terrain(map, tris);
    for (int iy = 0; iy < map.height(); ++iy)
        for (int ix = 0; ix < map.width(); ++ix) {
            const Vec2 center = map.cell_center(ix, iy);
            if (point_under_triangle(center, tris[0])) continue;
            CHECK(map.cell(ix, iy).height == before.cell(ix, iy).height);
            CHECK(map.cell(ix, iy).confidence == before.cell(ix, iy).confidence);
            CHECK(map.cell(ix, iy).valid == before.cell(ix, iy).valid);
        }
}

TEST_CASE("repeating an update on a fresh map is a fixed point") {
    GridMap2p5 map({-2, -2}, 0.1, 40, 40);
    std::vector<SupportTriangle> tris = {
        make_support_triangle({-1, -1, 0.0}, {1, -1, 0.1}, {0, 1, 0.05}, 0.7),
        make_support_triangle({-1, -1, 0.02}, {1.2, -0.8, 0.1}, {0.2, 1.1, 0.0}, 0.4)};
    update_terrain(map, tris);
    const GridMap2p5 once = map;
    update_terrain(map, tris);
    for (int iy = 0; iy < map.height(); ++iy)
        for (int ix = 0; ix < map.width(); ++ix) {
            CHECK(std::abs(map.cell(ix, iy).height - once.cell(ix, iy).height) < 1e-12);
            CHECK(std::abs(map.cell(ix, iy).confidence - once.cell(ix, iy).confidence) < 1e-12);
        }
}

TEST_CASE("disjoint updates commute exactly") {
    const std::vector<SupportTriangle> left = {
        make_support_triangle({-1.8, -1.8, 0.1}, {-0.8, -1.8, 0.1}, {-1.3, -0.8, 0.1}, 0.9)};
    const std::vector<SupportTriangle> right = {
        make_support_triangle({0.8, 0.8, 0.4}, {1.8, 0.8, 0.4}, {1.3, 1.8, 0.4}, 0.6)};

    GridMap2p5 map_ab({-2, -2}, 0.1, 40, 40);
    update_terrain(map_ab, left);
    update_terrain(map_ab, right);
    GridMap2p5 map_ba({-2, -2}, 0.1, 40, 40);
    update_terrain(map_ba, right);
    update_terrain(map_ba, left);
    for (int iy = 0; iy < map_ab.height(); ++iy)
        for (int ix = 0; ix < map_ab.width(); ++ix) {
            CHECK(map_ab.cell(ix, iy).height == map_ba.cell(ix, iy).height);
            CHECK(map_ab.cell(ix, iy).confidence == map_ba.cell(ix, iy).confidence);
        }
}

TEST_CASE("walking a straight line over a 10 degree slope reconstructs it") {
    const double slope = deg2rad(10.0);
    const auto terrain_z = [&](double x, double y) {
        (void)y;
        return std::tan(slope) * x;
    };
    GridMap2p5 map({-0.5, -0.6}, 0.05, 140, 24);
    TerrainEstimator est(std::move(map));

    // March a quadruped stance along +x, feet pinned to the slope.
    const double half_len = 0.19, half_wid = 0.1675;
    for (int cycle = 0; cycle < 200; ++cycle) {
        const double cx = 0.02 * cycle;
        const std::array<Vec3, 4> feet = {
            Vec3{cx + half_len, +half_wid, terrain_z(cx + half_len, +half_wid)},
            Vec3{cx + half_len, -half_wid, terrain_z(cx + half_len, -half_wid)},
            Vec3{cx - half_len, +half_wid, terrain_z(cx - half_len, +half_wid)},
            Vec3{cx - half_len, -half_wid, terrain_z(cx - half_len, -half_wid)}};
        for (int leg = 0; leg < 4; ++leg) est.record_contact(leg, feet[leg]);
        est.update({0.9, 0.9, 0.9, 0.9});
    }

    double sq_err = 0.0;
    int n = 0;
    const GridMap2p5& m = est.map();
    for (int iy = 0; iy < m.height(); ++iy)
        for (int ix = 0; ix < m.width(); ++ix) {
            if (!m.cell(ix, iy).valid) continue;
            const Vec2 c = m.cell_center(ix, iy);
            sq_err += std::pow(m.cell(ix, iy).height - terrain_z(c.x(), c.y()), 2);
            ++n;
        }
    REQUIRE(n > 500);
    CHECK(std::sqrt(sq_err / n) < 0.005);
}

TEST_CASE("fit_support_plane on coplanar cells is exact") {
    GridMap2p5 map({-1, -1}, 0.1, 20, 20);
    for (int ix = 8; ix < 12; ++ix)
        for (int iy = 8; iy < 12; ++iy) map.set_cell(ix, iy, 0.1, 1.0);
    const PlaneParams p = fit_support_plane(map, FootprintRect{{0.0, 0.0}, 0.6, 0.4});
    CHECK(std::abs(p.k1) < 1e-9);
    CHECK(std::abs(p.k2) < 1e-9);
    CHECK(p.k3 == Catch::Approx(1.0).margin(1e-9));
    CHECK(p.d == Catch::Approx(-0.1).margin(1e-9));
}

TEST_CASE("fit_support_plane error paths") {
    GridMap2p5 map({-1, -1}, 0.1, 20, 20);
    CHECK_THROWS_AS(fit_support_plane(map, FootprintRect{{0, 0}, 0.6, 0.4}), InsufficientPoints);
    map.set_cell(9, 9, 0.1, 1.0);
    map.set_cell(10, 9, 0.1, 1.0);
    CHECK_THROWS_AS(fit_support_plane(map, FootprintRect{{0, 0}, 0.6, 0.4}), InsufficientPoints);
    // A third collinear cell is rank-deficient, not a plane.
    map.set_cell(11, 9, 0.1, 1.0);
    CHECK_THROWS_AS(fit_support_plane(map, FootprintRect{{0, 0}, 0.6, 0.4}), DegeneratePlane);
}

TEST_CASE("noisy slope fit agrees with the vertical least-squares oracle") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1e-3);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    const double slope = deg2rad(20.0);
    const PlaneParams truth = [&] {
        PlaneParams p{-std::sin(slope), 0.0, std::cos(slope), 0.0, true};
        return p;
    }();

    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng), y = u(rng);
        pts.emplace_back(x, y, std::tan(slope) * x + noise(rng));
    }
    const PlaneParams fit = fit_plane_pca(pts);
    const PlaneParams oracle = vertical_ls_plane(pts);
    CHECK(rad2deg(plane_angle(fit, truth)) < 0.2);
    CHECK(rad2deg(plane_angle(fit, oracle)) < 0.05);
}

TEST_CASE("fitted plane passes through the centroid") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> pts;
        for (int i = 0; i < 30; ++i)
            pts.emplace_back(u(rng), u(rng), 0.3 * u(rng));
        const PlaneParams fit = fit_plane_pca(pts);
        double residual_sum = 0.0;
        for (const Vec3& p : pts) residual_sum += fit.signed_distance(p);
        CHECK(std::abs(residual_sum) < 1e-9);
    }
}

TEST_CASE("coplanar fit is invariant to xy translation") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<Vec3> pts;
    for (int i = 0; i < 25; ++i) {
        const double x = u(rng), y = u(rng);
        pts.emplace_back(x, y, 0.2 * x - 0.1 * y + 0.05);
    }
    const PlaneParams base = fit_plane_pca(pts);
    std::vector<Vec3> shifted = pts;
    for (Vec3& p : shifted) p += Vec3{3.7, -1.2, 0.0};
    const PlaneParams moved = fit_plane_pca(shifted);
    CHECK((base.normal() - moved.normal()).norm() < 1e-9);
}
