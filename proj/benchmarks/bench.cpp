#include <benchmark/benchmark.h>

#include <cmath>

#include "rowperm/conformal.hpp"
#include "rowperm/corrector.hpp"
#include "rowperm/euler_sim.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"

using namespace rowperm;

namespace {

const ObstacleShape& square_shape() {
    static const ObstacleShape s = ObstacleShape::regular_polygon(4);
    return s;
}

const ConformalMap& square_map() {
    static const ConformalMap m = map_for_shape(square_shape());
    return m;
}

void BM_ScForwardFar(benchmark::State& state) {
    const ConformalMap& map = square_map();
    int i = 0;
    for (auto _ : state) {
        const Cpx x = std::polar(5.0 + (i % 64) * 0.25, 0.11 * i);
        benchmark::DoNotOptimize(map.forward(x));
        ++i;
    }
}
BENCHMARK(BM_ScForwardFar);

void BM_ScForwardNear(benchmark::State& state) {
    const ConformalMap& map = square_map();
    int i = 0;
    for (auto _ : state) {
        const Cpx x = std::polar(1.02 + (i % 32) * 0.01, 0.07 * i);
        if (!square_shape().contains(to_vec(x))) benchmark::DoNotOptimize(map.forward(x));
        ++i;
    }
}
BENCHMARK(BM_ScForwardNear);

void BM_BiotSavartPoint(benchmark::State& state) {
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    int i = 0;
    for (auto _ : state) {
        const Vec2 x{0.43 + 0.001 * (i % 50), 0.75};
        benchmark::DoNotOptimize(biot_savart(f, x, 1e-7));
        ++i;
    }
}
BENCHMARK(BM_BiotSavartPoint);

void BM_SourceGridSum(benchmark::State& state) {
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    const SourceGrid grid = SourceGrid::build_auto(f, 1e-8);
    int i = 0;
    for (auto _ : state) {
        const Vec2 x{0.3 + 0.001 * (i % 100), 0.01};
        benchmark::DoNotOptimize(biot_savart(grid, x));
        ++i;
    }
}
BENCHMARK(BM_SourceGridSum);

void BM_ResidualPoint(benchmark::State& state) {
    auto square = shape_by_name("square");
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    PorousLattice lat = build_lattice(square, 0.1, 0.01);
    const CorrectorAssembly assembly(lat, square_map(), f, QuadratureSpec{});
    int i = 0;
    for (auto _ : state) {
        const Vec2 x = lat.centers()[4] + Vec2{-0.03 + 0.0005 * (i % 60), 0.056};
        benchmark::DoNotOptimize(assembly.residual_via_cells(4, x));
        ++i;
    }
}
BENCHMARK(BM_ResidualPoint);

void BM_ReflectionPass(benchmark::State& state) {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    PorousLattice lat = build_lattice(disk, 0.1, 0.01);
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    BlobEnsemble blobs = seed_blobs(f, 0.2 / 7);
    ReflectionSolver solver(lat, map, 64, 128, 1e-6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver.solve(blobs));
    }
}
BENCHMARK(BM_ReflectionPass);

void BM_CutoffPhi(benchmark::State& state) {
    const Cutoff c = cutoff_corner(0.05, 0.05 * 0.05, 0.9);
    int i = 0;
    for (auto _ : state) {
        const Vec2 x{-0.05 + 0.0001 * (i % 1000), 0.01};
        benchmark::DoNotOptimize(c.phi(x));
        benchmark::DoNotOptimize(c.grad_phi(x));
        ++i;
    }
}
BENCHMARK(BM_CutoffPhi);

} // namespace

BENCHMARK_MAIN();
