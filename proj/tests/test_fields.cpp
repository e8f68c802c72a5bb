#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rowperm/errors.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/quadrature.hpp"
#include "rowperm/util.hpp"

using namespace rowperm;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("vorticity caches match quadrature recomputation") {
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    CHECK(f.total_mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(f.l1_norm == doctest::Approx(1.0).epsilon(1e-8));
    // analytic peak 3/(pi r^2)
    CHECK(f.linf_norm == doctest::Approx(3.0 / (kPi * 0.04)).epsilon(1e-4));
    // analytic gradient peak 8 A / (3 sqrt(3) r)
    const double amp = 3.0 / (kPi * 0.04);
    CHECK(f.grad_linf_norm == doctest::Approx(8.0 * amp / (3.0 * std::sqrt(3.0) * 0.2)).epsilon(1e-3));

    // recomputation agreement at relative 1e-6
    QuadratureSpec spec;
    spec.abs_tol = 1e-10;
    const double mass = integrate_region([&](Vec2 p) { return f(p); },
                                         std::span<const Rect>(&f.support_box, 1), nullptr, spec);
    CHECK(std::abs(mass - f.total_mass) <= 1e-6 * f.total_mass);

    // evaluator vanishes outside the support box
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        Vec2 p{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        if (f.support_box.contains(p)) continue;
        CHECK(f(p) == 0.0);
    }
}

TEST_CASE("field catalog parses and rejects") {
    CHECK(field_by_name("bump:0.5,0.8,0.2").total_mass == doctest::Approx(1.0).epsilon(1e-8));
    const VorticityField d = field_by_name("dipole:0,0.5,0,-0.5,0.2");
    CHECK(d.total_mass == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(d.l1_norm == doctest::Approx(2.0).epsilon(1e-7));
    CHECK_THROWS_AS(field_by_name("vortex-sheet:1"), InvalidArgument);
}

TEST_CASE("biot_savart circulation oracle and symmetry") {
    const VorticityField f = mollified_disk_field({0, 0}, 1.0);
    const Vec2 u = biot_savart(f, {2, 0}, 1e-8);
    // radially symmetric: u = mass/(2 pi r) in the tangential direction
    CHECK(u.x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(u.y == doctest::Approx(f.total_mass / (4 * kPi)).epsilon(1e-6));

    // mirror equivariance: odd vorticity in x2 gives u(Rx) = R u(x), so the
    // axis-normal component vanishes on the axis
    const VorticityField dip = dipole_field({0.0, 0.5}, {0.0, -0.5}, 0.2);
    for (double x1 : {-0.7, 0.2, 1.3}) {
        const Vec2 ua = biot_savart(dip, {x1, 0.0}, 1e-7);
        CHECK(std::abs(ua.y) < 1e-6);
        const Vec2 up = biot_savart(dip, {x1, 0.4}, 1e-7);
        const Vec2 um = biot_savart(dip, {x1, -0.4}, 1e-7);
        CHECK(std::abs(up.x - um.x) < 1e-6);
        CHECK(std::abs(up.y + um.y) < 1e-6);
    }

    // sup bound |K[f]| <= C sqrt(|f|_1 |f|_inf) with C = 2 over the catalog
    for (const char* spec : {"bump:0.5,0.8,0.2", "mollified-disk:0,0,1", "dipole:0,0.5,0,-0.5,0.2"}) {
        const VorticityField g = field_by_name(spec);
        const double cap = 2.0 * std::sqrt(g.l1_norm * g.linf_norm);
        Rng rng(8);
        for (int k = 0; k < 40; ++k) {
            const Vec2 p{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
            CHECK(biot_savart(g, p, 1e-6).norm() <= cap);
        }
    }

    CHECK_THROWS_AS(biot_savart(f, {0, 0}, -1.0), InvalidArgument);
}

TEST_CASE("source grid sums agree with the adaptive integral away from supp f") {
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    const SourceGrid grid = SourceGrid::build_auto(f, 1e-9);
    CHECK(grid.mass == doctest::Approx(f.total_mass).epsilon(1e-9));
    for (Vec2 x : {Vec2{0.1, 0.0}, Vec2{1.4, 0.2}, Vec2{0.5, -0.6}}) {
        const Vec2 a = biot_savart(grid, x);
        const Vec2 b = biot_savart(f, x, 1e-9);
        CHECK(dist(a, b) < 1e-7);
    }
}

TEST_CASE("green function of the disk exterior") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);

    // hand value: |2-3| / (|2 - 1/3| * 3) = 1/5
    CHECK(green_exterior(map, {2, 0}, {3, 0}) ==
          doctest::Approx(std::log(0.2) / (2 * kPi)).epsilon(1e-12));

    // symmetry over random pairs
    Rng rng(17);
    for (int k = 0; k < 1000; ++k) {
        const Vec2 x{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        const Vec2 y{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        if (x.norm() < 1.01 || y.norm() < 1.01 || dist(x, y) < 1e-6) continue;
        CHECK(std::abs(green_exterior(map, x, y) - green_exterior(map, y, x)) < 1e-10);
        CHECK(green_exterior(map, x, y) < 0.0); // sign in the exterior
    }

    // Dirichlet decay at the boundary collar
    for (int k = 0; k < 64; ++k) {
        const double a = 2 * kPi * k / 64;
        const Vec2 x = (1.0 + 1e-4) * Vec2{std::cos(a), std::sin(a)};
        CHECK(std::abs(green_exterior(map, x, {2.5, 1.0})) < 1e-3);
    }

    CHECK_THROWS_AS(green_exterior(map, {0.5, 0.0}, {2.0, 0.0}), BoundaryEvaluation);
}

TEST_CASE("exterior flow: tangency, circulation, curl") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    const VorticityField f = bump_field({0.5, 3.0}, 0.2);
    QuadratureSpec spec;
    spec.abs_tol = 1e-9;
    const ExteriorFlow flow(map, f, spec);

    SUBCASE("tangent on the boundary") {
        double worst = 0;
        for (int k = 0; k < 512; ++k) {
            const double a = 2 * kPi * (k + 0.5) / 512;
            const Vec2 n{std::cos(a), std::sin(a)};
            worst = std::max(worst, std::abs(dot(flow.velocity((1.0 + 1e-10) * n), n)));
        }
        CHECK(worst <= 1e-6);
    }
    SUBCASE("zero circulation around the obstacle") {
        const auto contour = circle_contour({0, 0}, 1.001, 1024);
        const double c = circulation([&](Vec2 p) { return flow.velocity(p); }, contour, nullptr);
        CHECK(std::abs(c) <= 1e-5);
    }
    SUBCASE("curl recovers f inside the support") {
        const Vec2 x{0.45, 3.05};
        const double h = 1e-5;
        auto vel = [&](Vec2 p) { return flow.velocity(p); };
        const double curl = (vel({x.x + h, x.y}).y - vel({x.x - h, x.y}).y) / (2 * h) -
                            (vel({x.x, x.y + h}).x - vel({x.x, x.y - h}).x) / (2 * h);
        CHECK(curl == doctest::Approx(f(x)).epsilon(1e-5));
    }
    SUBCASE("divergence-free in finite differences") {
        const double h = 1e-4;
        for (Vec2 x : {Vec2{0.4, 2.9}, Vec2{1.8, 0.3}, Vec2{-1.2, 1.0}}) {
            const double div =
                (flow.velocity({x.x + h, x.y}).x - flow.velocity({x.x - h, x.y}).x) / (2 * h) +
                (flow.velocity({x.x, x.y + h}).y - flow.velocity({x.x, x.y - h}).y) / (2 * h);
            CHECK(std::abs(div) <= 1e-4);
        }
    }
    SUBCASE("zero field for zero vorticity") {
        // dipole with coincident lobes cancels identically
        VorticityField zero = bump_field({0.5, 3.0}, 0.2);
        auto base = zero.evaluator;
        zero.evaluator = [base](Vec2 p) { return base(p) - base(p); };
        const ExteriorFlow zflow(map, zero, spec);
        CHECK(zflow.velocity({2.0, 2.0}).norm() < 1e-12);
    }
    SUBCASE("far-field decay like 1/|x|") {
        const double diam = 2 * 3.6; // supp f and hole fit in B(0, 3.6)
        for (double r : {1.0 * diam, 2.0 * diam, 4.0 * diam}) {
            const Vec2 u = flow.velocity({r, 0.2});
            CHECK(u.norm() <= 2.0 * std::abs(flow.mass()) / (2 * kPi * r));
        }
    }
}

TEST_CASE("exterior flow matches the image-vortex formula on a point mass") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    const Vec2 y0{2.0, 1.5};
    const VorticityField f = bump_field(y0, 1e-3); // near-point unit vortex
    QuadratureSpec spec;
    spec.abs_tol = 1e-10;
    const ExteriorFlow flow(map, f, spec);
    for (Vec2 x : {Vec2{0.3, 1.9}, Vec2{-1.5, 0.2}, Vec2{1.2, -1.2}}) {
        const Vec2 via_green = point_vortex_exterior_velocity(map, y0, 1.0, x);
        CHECK(dist(flow.velocity(x), via_green) <= 1e-5);
    }
}

TEST_CASE("velocity field provenance tags") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    const VorticityField f = bump_field({0.5, 3.0}, 0.2);
    const VelocityField plane = whole_plane_field(f, 1e-7);
    CHECK(plane.provenance == "whole-plane");
    QuadratureSpec spec;
    const ExteriorFlow flow(map, f, spec);
    const VelocityField ext = flow.as_field();
    CHECK(ext.provenance == "exterior-one-obstacle");
    CHECK(dist(ext({2.0, 2.0}), flow.velocity({2.0, 2.0})) == 0.0);
}

TEST_CASE("circulation operation") {
    const VorticityField f = bump_field({0.0, 0.0}, 0.3);

    SUBCASE("Stokes oracle: contour around supp f captures the mass") {
        // trapezoid bias on an inscribed n-gon is (2 pi / n)^2 / 6, so the
        // 1e-6 refinement contract needs a few thousand nodes
        auto contour = circle_contour({0, 0}, 1.0, 4096);
        const double got = circulation([&](Vec2 p) { return biot_savart(f, p, 1e-8); }, contour);
        CHECK(got == doctest::Approx(f.total_mass).epsilon(1e-6));
        auto contour2 = circle_contour({0, 0}, 1.0, 8192);
        const double got2 = circulation([&](Vec2 p) { return biot_savart(f, p, 1e-8); }, contour2);
        CHECK(std::abs(got2 - got) < 1e-6 * std::max(1.0, std::abs(got)));
    }
    SUBCASE("contour enclosing nothing") {
        auto contour = circle_contour({3.0, 3.0}, 0.5, 256);
        const double got = circulation([&](Vec2 p) { return biot_savart(f, p, 1e-8); }, contour);
        CHECK(std::abs(got) < 1e-7);
    }
    SUBCASE("contour through an obstacle is rejected") {
        auto disk = shape_by_name("disk");
        PorousLattice lat = build_lattice(disk, 0.5, 0.5);
        auto contour = circle_contour(lat.centers()[0], 0.1, 64);
        CHECK_THROWS_AS(
            circulation([](Vec2) { return Vec2{0, 0}; }, contour, &lat), ContourHitsObstacle);
    }
}
