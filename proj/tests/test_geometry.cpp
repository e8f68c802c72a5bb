#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "rowperm/errors.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/util.hpp"

using namespace rowperm;

namespace {
constexpr double kPi = std::numbers::pi;

// Independent winding-number oracle over a dense boundary polyline.
bool winding_inside(const std::vector<Vec2>& poly, Vec2 p) {
    double angle = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 a = poly[i] - p;
        const Vec2 b = poly[(i + 1) % poly.size()] - p;
        angle += std::atan2(cross(a, b), dot(a, b));
    }
    return std::abs(angle) > kPi;
}
} // namespace

TEST_CASE("build_lattice matches the center and count formulas") {
    auto square = shape_by_name("square");
    auto disk = shape_by_name("disk");

    PorousLattice a = build_lattice(square, 0.1, 0.01);
    CHECK(a.n_holes() == 9); // integer part of 1.01 / 0.11
    CHECK(a.centers()[0].x == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(a.centers()[0].y == 0.0);

    PorousLattice b = build_lattice(disk, 0.5, 0.5);
    CHECK(b.n_holes() == 1); // integer part of 1.5 / 1.0
    CHECK(b.centers()[0].x == doctest::Approx(0.25).epsilon(1e-15));

    // exact-rational oracle: (1 + 4/10000) / (2/100 + 4/10000) with integer
    // arithmetic on the common denominator 10000
    const long long num = 10000 + 4, den = 200 + 4;
    CHECK(num / den == 49);
    PorousLattice c = build_lattice(disk, 0.02, 0.0004);
    CHECK(c.n_holes() == 49);

    CHECK_THROWS_AS(build_lattice(disk, -0.1, 0.01), NonPositiveScale);
    CHECK_THROWS_AS(build_lattice(disk, 0.1, 0.0), NonPositiveScale);
}

TEST_CASE("lattice invariants: separation and scale consistency") {
    auto square = shape_by_name("square");
    PorousLattice lat = build_lattice(square, 0.1, 0.01);

    // consecutive bounding boxes separated by exactly d_eps
    for (int i = 0; i + 1 < lat.n_holes(); ++i) {
        const double gap = lat.hole_box(i + 1).lo.x - lat.hole_box(i).hi.x;
        CHECK(gap == doctest::Approx(0.01).epsilon(1e-12));
    }
    // boundary-sample separation >= d (1 - 1e-9)
    const auto poly = square->boundary_polyline(256);
    double min_gap = 1e300;
    for (int i = 0; i + 1 < lat.n_holes(); ++i) {
        for (const Vec2& pa : poly) {
            for (const Vec2& pb : poly) {
                const Vec2 qa = lat.centers()[std::size_t(i)] + 0.05 * pa;
                const Vec2 qb = lat.centers()[std::size_t(i) + 1] + 0.05 * pb;
                min_gap = std::min(min_gap, dist(qa, qb));
            }
        }
        break; // identical spacing between every pair
    }
    CHECK(min_gap >= 0.01 * (1 - 1e-9));

    // doubling eps with d fixed at most halves N + 1
    for (double d : {0.01, 0.07}) {
        const int n1 = build_lattice(square, 0.05, d).n_holes();
        const int n2 = build_lattice(square, 0.1, d).n_holes();
        CHECK(n2 + 1 >= (n1 + 1) / 2);
    }
}

TEST_CASE("in_fluid agrees with the winding oracle") {
    auto square = shape_by_name("square");
    PorousLattice lat = build_lattice(square, 0.1, 0.01);

    CHECK(in_fluid(lat, {10, 10}));
    CHECK(!in_fluid(lat, lat.centers()[0]));
    // midpoint of the gap between holes 1 and 2
    const double mid = 0.5 * (lat.hole_box(0).hi.x + lat.hole_box(1).lo.x);
    CHECK(in_fluid(lat, {mid, 0.0}));

    // dense random agreement with the winding oracle
    std::vector<std::vector<Vec2>> hole_polys;
    for (int i = 0; i < lat.n_holes(); ++i) {
        std::vector<Vec2> poly;
        for (const Vec2& p : square->boundary_polyline(512))
            poly.push_back(lat.centers()[std::size_t(i)] + 0.05 * p);
        hole_polys.push_back(std::move(poly));
    }
    Rng rng(2024);
    int mismatches = 0;
    for (int k = 0; k < 10000; ++k) {
        const Vec2 p{rng.uniform(-0.2, 1.2), rng.uniform(-0.15, 0.15)};
        bool inside_any = false;
        for (const auto& poly : hole_polys)
            if (winding_inside(poly, p)) inside_any = true;
        if (in_fluid(lat, p) != !inside_any) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("check_hypotheses on the catalog") {
    SUBCASE("disk: smooth boundary, no corner at (1,0)") {
        auto disk = shape_by_name("disk");
        const HypothesisReport rep = check_hypotheses(*disk);
        CHECK(rep.h1.pass);
        CHECK(!rep.h2.pass);
        CHECK(rep.h2.detail == "no corner at (1,0)");
        CHECK(rep.h3.pass); // vacuous
        CHECK(rep.vertically_symmetric);
    }
    SUBCASE("square passes everything with angle 3pi/2") {
        auto square = shape_by_name("square");
        const HypothesisReport rep = check_hypotheses(*square);
        CHECK(rep.h1.pass);
        CHECK(rep.h2.pass);
        CHECK(rep.h3.pass);
        REQUIRE(rep.measured_angles.size() == 4);
        for (double a : rep.measured_angles) CHECK(a == doctest::Approx(1.5 * kPi).epsilon(1e-9));
        CHECK(rep.rho_estimate > 0.5);
        CHECK(rep.rho_estimate < 1.0);
    }
    SUBCASE("a convex corner fails (H3)") {
        // an L-shaped hexagon has a reflex vertex whose fluid angle is pi/2
        std::vector<Vec2> v{{1, 0}, {1, 0.6}, {0.2, 0.6}, {0.2, 1}, {-1, 1}, {-1, -1}, {1, -1}};
        ObstacleShape shape = ObstacleShape::polygon(v);
        const HypothesisReport rep = check_hypotheses(shape);
        CHECK(!rep.h3.pass);
        bool has_small = false;
        for (const Corner& c : shape.corners())
            if (c.angle < kPi) has_small = true;
        CHECK(has_small);
    }
    SUBCASE("regular polygons: fluid angle (n+2)pi/n") {
        for (int n : {3, 5, 6}) {
            auto shape = shape_by_name("regular-polygon:" + std::to_string(n));
            const HypothesisReport rep = check_hypotheses(*shape);
            CHECK(rep.h1.pass);
            CHECK(rep.h2.pass);
            CHECK(rep.h3.pass);
            for (double a : rep.measured_angles)
                CHECK(a == doctest::Approx((n + 2) * kPi / n).epsilon(1e-9));
        }
    }
}

TEST_CASE("custom shapes load from point files") {
    const std::string path = "custom_shape_test.txt";
    {
        std::ofstream out(path);
        out << "1 0\n0.9 0.8\n-0.7 0.9\n-1 0\n-0.7 -0.9\n0.9 -0.8\n";
    }
    auto shape = shape_by_name("custom:" + path);
    CHECK(shape->kind() == ObstacleShape::Kind::Custom);
    CHECK(shape->corners().size() == 6);
    CHECK(shape->contains({0, 0}));
    CHECK(!shape->contains({1.5, 0}));
    std::remove(path.c_str());
}

TEST_CASE("delta_inner and wedge rho") {
    auto square = shape_by_name("square");
    CHECK(square->delta_inner() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(square->wedge_rho() == doctest::Approx(0.9).epsilon(1e-6));
    auto disk = shape_by_name("disk");
    CHECK(disk->delta_inner() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(disk->wedge_rho() == 0.0); // no positive slope survives sampling
}
