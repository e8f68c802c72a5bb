#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rowperm/errors.hpp"
#include "rowperm/euler_sim.hpp"
#include "rowperm/util.hpp"

using namespace rowperm;

namespace {
constexpr double kPi = std::numbers::pi;

EnsembleVelocity mutual_velocity(const BlobEnsemble& proto) {
    return [weights = proto.weights, core = proto.core_radius](const std::vector<Vec2>& pos,
                                                               double) {
        BlobEnsemble tmp;
        tmp.positions = pos;
        tmp.weights = weights;
        tmp.core_radius = core;
        std::vector<Vec2> out(pos.size());
        for (std::size_t p = 0; p < pos.size(); ++p) out[p] = blob_velocity(tmp, pos[p]);
        return out;
    };
}
} // namespace

TEST_CASE("single blob is stationary") {
    BlobEnsemble b;
    b.positions = {{0.3, 0.4}};
    b.weights = {1.0};
    b.core_radius = 0.01;
    const BlobEnsemble after = advect(b, mutual_velocity(b), 0.01, 1.0, nullptr);
    CHECK(dist(after.positions[0], {0.3, 0.4}) <= 1e-12);
}

TEST_CASE("two blobs co-rotate with the closed-form period") {
    const double L = 0.5, G = 0.8;
    BlobEnsemble b;
    b.positions = {{-L / 2, 0}, {L / 2, 0}};
    b.weights = {G, G};
    b.core_radius = 2e-3;
    const double period = 2 * kPi * kPi * L * L / G;
    const BlobEnsemble after = advect(b, mutual_velocity(b), 1e-3 * period, period, nullptr);
    CHECK(dist(after.positions[0], {-L / 2, 0}) <= 1e-3 * L); // 0.1% of the diameter
    CHECK(dist(after.positions[1], {L / 2, 0}) <= 1e-3 * L);
}

TEST_CASE("whole-plane invariants: weights, center, moment, reversal") {
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    BlobEnsemble b = seed_blobs(f, 0.2 / 7);
    const auto w0 = b.weights;
    const double circ0 = b.total_circulation();
    const Vec2 c0 = b.vorticity_center();
    const double m0 = b.second_moment();

    BlobEnsemble fwd = advect(b, mutual_velocity(b), 0.01, 1.0, nullptr);
    CHECK(fwd.weights == w0); // transport form: weights never change
    CHECK(fwd.total_circulation() == circ0);
    CHECK(dist(fwd.vorticity_center(), c0) <= 1e-6);
    CHECK(std::abs(fwd.second_moment() - m0) <= 1e-6 * std::abs(m0));

    // time reversal at dt = 1e-3
    auto backward = [vel = mutual_velocity(b)](const std::vector<Vec2>& pos, double t) {
        auto out = vel(pos, t);
        for (Vec2& v : out) v = -v;
        return out;
    };
    BlobEnsemble back = fwd;
    back.time = 0.0;
    back = advect(back, backward, 1e-3, 1.0, nullptr);
    double worst = 0;
    for (std::size_t p = 0; p < b.positions.size(); ++p)
        worst = std::max(worst, dist(back.positions[p], b.positions[p]));
    CHECK(worst <= 1e-4);
}

TEST_CASE("advect guards") {
    BlobEnsemble b;
    b.positions = {{0, 0}, {0.01, 0}};
    b.weights = {5.0, 5.0};
    b.core_radius = 1e-4; // max|u| dt far exceeds the core
    CHECK_THROWS_AS(advect(b, mutual_velocity(b), 0.1, 0.2, nullptr), InvalidArgument);
    CHECK_THROWS_AS(advect(b, mutual_velocity(b), -0.1, 0.2, nullptr), InvalidArgument);
}

TEST_CASE("reflections on a single hole match the image oracle") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    PorousLattice lat = build_lattice(disk, 0.6, 0.5); // one inclusion
    BlobEnsemble b;
    b.positions = {{0.8, 0.9}};
    b.weights = {0.7};
    b.core_radius = 1e-6;

    ReflectionSolver solver(lat, map, 64, 128, 1e-10);
    const int passes = solver.solve(b);
    CHECK(passes == 1); // no iteration needed with one obstacle
    CHECK(solver.achieved_residual() <= 1e-10);

    const ConformalMap hole_map = rescaled_map(map, lat.centers()[0], 0.6);
    double worst = 0;
    for (Vec2 x : {Vec2{0.0, 0.5}, Vec2{0.9, -0.4}, Vec2{-0.5, -0.1}, Vec2{0.65, 0.02}}) {
        const Vec2 got = solver.velocity(x);
        const Vec2 full = point_vortex_exterior_velocity(hole_map, b.positions[0], b.weights[0], x);
        const Cpx d = to_cpx(x) - to_cpx(b.positions[0]);
        const Vec2 direct = to_vec(b.weights[0] / (2 * kPi) * Cpx{0, 1} * d / std::norm(d));
        const Vec2 oracle = blob_velocity(b, x) + (full - direct);
        worst = std::max(worst, dist(got, oracle));
    }
    CHECK(worst <= 1e-8);
    CHECK(std::abs(solver.hole_circulation(0)) <= 1e-8);

    // operation-shaped wrapper
    const Vec2 u = velocity_perforated(lat, map, b, {0.0, 0.5}, 1e-8);
    CHECK(dist(u, solver.velocity({0.0, 0.5})) <= 1e-8);
}

TEST_CASE("zero blobs give the zero field") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    PorousLattice lat = build_lattice(disk, 0.2, 0.04);
    BlobEnsemble empty;
    empty.core_radius = 0.01;
    ReflectionSolver solver(lat, map, 32, 64, 1e-8);
    solver.solve(empty);
    CHECK(solver.velocity({0.5, 0.3}).norm() <= 1e-14);
}

TEST_CASE("two well-separated holes converge in a few passes") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    PorousLattice lat = build_lattice(disk, 0.08, 0.8); // gap = 10 eps, two holes
    REQUIRE(lat.n_holes() == 2);
    BlobEnsemble b;
    b.positions = {{0.4, 0.6}};
    b.weights = {1.0};
    b.core_radius = 1e-4;
    ReflectionSolver solver(lat, map, 64, 128, 1e-6);
    const int passes = solver.solve(b);
    CHECK(passes <= 5);
    CHECK(solver.achieved_residual() <= 1e-6);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(solver.hole_circulation(i)) <= 1e-7);
}

TEST_CASE("perforated transport preserves mirror symmetry") {
    // eps = 0.16, d = 0.05 tiles [0,1] exactly with five holes, so the
    // lattice is symmetric about x1 = 1/2.
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    PorousLattice lat = build_lattice(disk, 0.16, 0.05);
    REQUIRE(lat.n_holes() == 5);
    CHECK(lat.centers().front().x + lat.centers().back().x == doctest::Approx(1.0).epsilon(1e-12));

    BlobEnsemble b;
    // mirror-symmetric data about x1 = 1/2: vorticity flips sign under the
    // reflection, so the pair carries opposite circulations
    b.positions = {{0.2, 0.6}, {0.8, 0.6}};
    b.weights = {0.5, -0.5};
    b.core_radius = 5e-3;
    ReflectionSolver solver(lat, map, 48, 96, 1e-9);
    auto vel = [&](const std::vector<Vec2>& pos, double) {
        BlobEnsemble tmp;
        tmp.positions = pos;
        tmp.weights = b.weights;
        tmp.core_radius = b.core_radius;
        solver.solve(tmp);
        std::vector<Vec2> out(pos.size());
        for (std::size_t p = 0; p < pos.size(); ++p) out[p] = solver.velocity(pos[p]);
        return out;
    };
    const BlobEnsemble after = advect(b, vel, 0.01, 1.0, &lat);
    const Vec2 a = after.positions[0], c = after.positions[1];
    CHECK(std::abs((a.x - 0.5) + (c.x - 0.5)) <= 1e-8);
    CHECK(std::abs(a.y - c.y) <= 1e-8);
}

TEST_CASE("stability report basics") {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    PorousLattice lat = build_lattice(disk, 0.2, 0.04);
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);

    const StabilityReport rep = stability_report(f, lat, map, 0.3, 0.02);
    CHECK(rep.sup_traj_gap > 0);
    CHECK(rep.sup_traj_gap < 0.05);
    CHECK(!rep.support_hit);
    CHECK(std::isfinite(rep.velocity_gap));
    // gap(0) = 0 for all seeds: the first snapshot rows carry zero gap
    for (const TrajectorySample& s : rep.series) {
        if (s.t == 0.0) CHECK(s.gap == 0.0);
    }

    // support too close to the segment is rejected citing the 0.3 guard
    const VorticityField near_field = bump_field({0.5, 0.3}, 0.15);
    bool threw = false;
    try {
        stability_report(near_field, lat, map, 0.1, 0.01);
    } catch (const InvalidArgument& e) {
        threw = true;
        CHECK(std::string(e.what()).find("0.3") != std::string::npos);
    }
    CHECK(threw);
}
