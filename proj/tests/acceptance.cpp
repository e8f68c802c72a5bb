// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Filter with --only 1,4,9. Every tolerance is pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rowperm/conformal.hpp"
#include "rowperm/corrector.hpp"
#include "rowperm/euler_sim.hpp"
#include "rowperm/experiments.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/util.hpp"

using namespace rowperm;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double time_limit_s;
    std::function<Outcome()> run;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------- 1
Outcome corner_exponent() {
    auto square = shape_by_name("square");
    const ConformalMap map = map_for_shape(*square);
    const CornerAsymptotics ca = probe_corner_exponent(map, *square, 0);
    const double diff = std::abs(ca.fitted_exponent - (-1.0 / 3.0));
    Outcome out;
    out.pass = diff <= 0.02;
    out.detail = "fitted " + fmt(ca.fitted_exponent) + " vs -1/3, |diff| " + fmt(diff) + " <= 0.02";
    return out;
}

// ---------------------------------------------------------------------- 2
Outcome holder_modulus() {
    auto square = shape_by_name("square");
    const ConformalMap map = map_for_shape(*square);
    const HolderProbe h1 = probe_holder(map, *square, 10000);
    const HolderProbe h2 = probe_holder(map, *square, 20000);
    Outcome out;
    const bool finite = std::isfinite(h1.m_hat) && h1.m_hat > 0;
    const double growth = h2.m_hat / h1.m_hat;
    out.pass = finite && growth < 2.0;
    out.detail = "M_hat " + fmt(h1.m_hat) + ", doubling growth " + fmt(growth) + " < 2, mu_hat " +
                 fmt(h1.mu_hat);
    return out;
}

// ---------------------------------------------------------------------- 3
Outcome disk_degeneracy() {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    QuadratureSpec spec;
    spec.abs_tol = 1e-7;
    PorousLattice lat = build_lattice(disk, 0.1, 0.01);
    const CorrectorAssembly A(lat, map, f, spec);
    Rng rng(1003);
    double w1max = 0, w3max = 0;
    int samples = 0;
    while (samples < 1000) {
        const int i = int(rng.next() % std::uint64_t(lat.n_holes()));
        const Rect box = A.support_box(i);
        const Vec2 x{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y)};
        if (!in_fluid(lat, x)) continue;
        ++samples;
        const auto m = A.map_data(i, x);
        w1max = std::max(w1max, std::abs(A.w1(i, x, m)));
        w3max = std::max(w3max, A.w3(i, x, m).norm());
    }
    Outcome out;
    out.pass = w1max <= 10 * spec.abs_tol && w3max <= 10 * spec.abs_tol;
    out.detail = "sup|w1| " + fmt(w1max) + ", sup|w3| " + fmt(w3max) + " <= " + fmt(10 * spec.abs_tol);
    return out;
}

// ---------------------------------------------------------------------- 4
Outcome decomposition_identity() {
    auto square = shape_by_name("square");
    const ConformalMap map = map_for_shape(*square);
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    QuadratureSpec spec;
    spec.abs_tol = 1e-7;
    PorousLattice lat = build_lattice(square, 0.1, 0.01);
    const CorrectorAssembly A(lat, map, f, spec);
    const int n = lat.n_holes();
    std::vector<double> per_hole(std::size_t(n), 0.0);
    parallel_for(std::size_t(n), thread_count(), [&](std::size_t i) {
        Rng rng(7000 + std::uint64_t(i));
        const Rect box = A.support_box(int(i));
        double worst = 0;
        int pts = 0;
        while (pts < 1000) {
            const Vec2 x{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y)};
            if (!in_fluid(lat, x)) continue;
            ++pts;
            Vec2 rhs{0, 0};
            for (int j = std::max(0, int(i) - 1); j <= std::min(n - 1, int(i) + 1); ++j)
                rhs += A.residual_via_cells(j, x);
            worst = std::max(worst, (A.residual_direct(x) - rhs).norm());
        }
        per_hole[i] = worst;
    });
    double worst = 0;
    for (double v : per_hole) worst = std::max(worst, v);
    Outcome out;
    out.pass = worst <= 1e-5;
    out.detail = "max identity gap " + fmt(worst) + " <= 1e-5 over 1000 pts x " +
                 std::to_string(n) + " holes";
    return out;
}

// ---------------------------------------------------------------------- 5
Outcome cutoff_norms() {
    const double eps = 0.05;
    double lo = 1e300, hi = 0, lo4 = 1e300, hi4 = 0;
    for (double d : {eps * eps, std::pow(eps, 3), std::pow(eps, 4)}) {
        const Cutoff c = cutoff_corner(eps, d, 0.9);
        const double r = c.grad_l2_norm() * c.grad_l2_norm() / (1.0 + std::log(eps / d));
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        const double r4 = c.l4_norm() / std::sqrt(eps);
        lo4 = std::min(lo4, r4);
        hi4 = std::max(hi4, r4);
    }
    Outcome out;
    out.pass = hi / lo <= 3.0 && hi4 / lo4 <= 2.0;
    out.detail = "grad^2/(1+ln(eps/d)) band " + fmt(hi / lo) + " <= 3, |phi|_L4/sqrt(eps) band " +
                 fmt(hi4 / lo4) + " <= 2";
    return out;
}

// ---------------------------------------------------------------------- 6
Outcome permeability_rate() {
    auto disk = shape_by_name("disk");
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    QuadratureSpec spec;
    spec.abs_tol = 1e-7;
    const double eps_list[] = {0.2, 0.1, 0.05, 0.025};
    const auto recs = rate_sweep(disk, f, eps_list, [](double e) { return e * e; }, spec);
    double lo = 1e300, hi = 0;
    std::string ratios;
    for (const RateRecord& r : recs) {
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
        ratios += " " + fmt(r.ratio);
    }
    Outcome out;
    out.pass = hi / lo <= 3.0;
    out.detail = "residual/bound ratios" + ratios + "; max/min " + fmt(hi / lo) + " <= 3";
    return out;
}

// ---------------------------------------------------------------------- 7
Outcome cell_estimates() {
    auto square = shape_by_name("square");
    const ConformalMap map = map_for_shape(*square);
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    QuadratureSpec spec;
    spec.abs_tol = 1e-7;
    const double eps_list[] = {0.2, 0.1, 0.05, 0.025};
    double lo1 = 1e300, hi1 = 0, lo2 = 1e300, hi2 = 0, lo3 = 1e300, hi3 = 0, lo4 = 1e300, hi4 = 0;
    std::string detail;
    for (double eps : eps_list) {
        const double d = eps * eps;
        PorousLattice lat = build_lattice(square, eps, d);
        const CorrectorAssembly A(lat, map, f, spec);
        const auto rows = cell_table(A, spec);
        double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
        for (const CellRow& r : rows) {
            s1 = std::max(s1, r.sup_w1_over_eps);
            s2 = std::max(s2, r.sup_w2_over_eps);
            s3 = std::max(s3, r.l4_w3_normalized);
            s4 = std::max(s4, r.l4_w4_normalized);
        }
        lo1 = std::min(lo1, s1); hi1 = std::max(hi1, s1);
        lo2 = std::min(lo2, s2); hi2 = std::max(hi2, s2);
        lo3 = std::min(lo3, s3); hi3 = std::max(hi3, s3);
        lo4 = std::min(lo4, s4); hi4 = std::max(hi4, s4);
    }
    Outcome out;
    out.pass = hi1 / lo1 <= 3.0 && hi2 / lo2 <= 3.0 && hi3 / lo3 <= 3.0 && hi4 / lo4 <= 3.0;
    out.detail = "bands w1 " + fmt(hi1 / lo1) + ", w2 " + fmt(hi2 / lo2) + ", w3 " +
                 fmt(hi3 / lo3) + ", w4 " + fmt(hi4 / lo4) + " (each <= 3)";
    return out;
}

// ---------------------------------------------------------------------- 8
Outcome tangency_circulation() {
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    QuadratureSpec spec;
    spec.abs_tol = 1e-8;
    Outcome out;
    std::string detail;
    bool pass = true;

    // corrector, exact disk map
    {
        auto disk = shape_by_name("disk");
        const ConformalMap map = map_for_shape(*disk);
        PorousLattice lat = build_lattice(disk, 0.1, 0.01);
        const CorrectorAssembly A(lat, map, f, spec);
        double tang = 0, circ = 0;
        for (int i : {0, 4, 8}) {
            const Vec2 c = lat.centers()[std::size_t(i)];
            std::vector<Vec2> contour;
            for (int k = 0; k < 256; ++k) {
                const double a = 2 * kPi * (k + 0.5) / 256;
                const Vec2 nrm{std::cos(a), std::sin(a)};
                const Vec2 x = c + 0.05 * (1 + 1e-9) * nrm;
                tang = std::max(tang, std::abs(dot(A.corrector_velocity(x), nrm)));
                contour.push_back(x);
            }
            circ = std::max(circ, std::abs(circulation(
                                      [&](Vec2 p) { return A.corrector_velocity(p); }, contour)));
        }
        pass = pass && tang <= 1e-5 && circ <= 1e-5;
        detail += "disk corrector |u.n| " + fmt(tang) + " circ " + fmt(circ);
    }
    // corrector, numeric SC map
    {
        auto square = shape_by_name("square");
        const ConformalMap map = map_for_shape(*square);
        PorousLattice lat = build_lattice(square, 0.1, 0.01);
        const CorrectorAssembly A(lat, map, f, spec);
        double tang = 0, circ = 0;
        for (int i : {0, 4}) {
            const Vec2 c = lat.centers()[std::size_t(i)];
            std::vector<Vec2> contour;
            for (int k = 0; k < 256; ++k) {
                const double s = square->perimeter() * (k + 0.5) / 256;
                const Vec2 b = square->boundary_point(s);
                const Vec2 t = square->tangent_after(s);
                const Vec2 outward{t.y, -t.x}; // fluid is right of the ccw solid boundary
                const Vec2 x = c + 0.05 * b + 1e-9 * outward;
                tang = std::max(tang, std::abs(dot(A.corrector_velocity(x), outward)));
                contour.push_back(x);
            }
            circ = std::max(circ, std::abs(circulation(
                                      [&](Vec2 p) { return A.corrector_velocity(p); }, contour)));
        }
        pass = pass && tang <= 1e-4 && circ <= 1e-5;
        detail += "; square corrector |u.n| " + fmt(tang) + " circ " + fmt(circ);
    }
    // reflected velocity
    {
        auto disk = shape_by_name("disk");
        const ConformalMap map = map_for_shape(*disk);
        PorousLattice lat = build_lattice(disk, 0.1, 0.01);
        BlobEnsemble blobs = seed_blobs(f, 0.2 / 7);
        ReflectionSolver solver(lat, map, 64, 128, 1e-6);
        solver.solve(blobs);
        double circ = 0;
        for (int i = 0; i < lat.n_holes(); ++i)
            circ = std::max(circ, std::abs(solver.hole_circulation(i)));
        pass = pass && solver.achieved_residual() <= 1e-5 && circ <= 1e-5;
        detail += "; reflected |u.n| " + fmt(solver.achieved_residual()) + " circ " + fmt(circ);
    }
    out.pass = pass;
    out.detail = detail;
    return out;
}

// ---------------------------------------------------------------------- 9
Outcome two_vortex_oracle() {
    const double L = 0.5, G = 0.8;
    BlobEnsemble b;
    b.positions = {{-L / 2, 0}, {L / 2, 0}};
    b.weights = {G, G};
    b.core_radius = 2e-3;
    const double period = 2 * kPi * kPi * L * L / G;
    auto vel = [&](const std::vector<Vec2>& pos, double) {
        BlobEnsemble tmp;
        tmp.positions = pos;
        tmp.weights = b.weights;
        tmp.core_radius = b.core_radius;
        std::vector<Vec2> out(pos.size());
        for (std::size_t p = 0; p < pos.size(); ++p) out[p] = blob_velocity(tmp, pos[p]);
        return out;
    };
    const BlobEnsemble after = advect(b, vel, 1e-3 * period, period, nullptr);
    const double err = std::max(dist(after.positions[0], {-L / 2, 0}),
                                dist(after.positions[1], {L / 2, 0})) / L;
    Outcome out;
    out.pass = err <= 1e-3;
    out.detail = "period " + fmt(period) + ", relative return error " + fmt(err) + " <= 0.001";
    return out;
}

// ---------------------------------------------------------------------- 10
Outcome stability_trend() {
    auto disk = shape_by_name("disk");
    const ConformalMap map = map_for_shape(*disk);
    const VorticityField f = bump_field({0.5, 0.8}, 0.2);
    std::vector<double> gaps, ratios;
    std::string detail = "sup traj gaps:";
    for (double eps : {0.2, 0.1, 0.05}) {
        PorousLattice lat = build_lattice(disk, eps, eps * eps);
        const StabilityReport rep = stability_report(f, lat, map, 1.0, 0.01);
        gaps.push_back(rep.sup_traj_gap);
        ratios.push_back(rep.sup_traj_gap / permeability_bound(eps, eps * eps));
        detail += " " + fmt(rep.sup_traj_gap);
        if (rep.support_hit) detail += " (support hit t=" + fmt(rep.t_hit) + ")";
    }
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < gaps.size(); ++k)
        if (gaps[k + 1] > 1.2 * gaps[k]) monotone = false;
    bool finite = true;
    detail += "; gap/bound:";
    for (double r : ratios) {
        finite = finite && std::isfinite(r);
        detail += " " + fmt(r);
    }
    Outcome out;
    out.pass = monotone && finite;
    out.detail = detail + (monotone ? "" : " NOT monotone within 20%");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int a = 1; a < argc; ++a) {
        if (std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
            std::stringstream ss(argv[a + 1]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.push_back(std::stoi(tok));
        }
        if (std::strcmp(argv[a], "--threads") == 0 && a + 1 < argc)
            set_thread_count(std::stoi(argv[a + 1]));
    }
    if (thread_count() == 1) set_thread_count(2);

    const std::vector<Criterion> criteria{
        {1, "corner exponent (square, -1/3)", 10, corner_exponent},
        {2, "Hoelder modulus stability", 30, holder_modulus},
        {3, "disk degeneracy w1 = w3 = 0", 60, disk_degeneracy},
        {4, "decomposition identity", 300, decomposition_identity},
        {5, "cutoff norm scalings", 60, cutoff_norms},
        {6, "permeability rate boundedness", 1800, permeability_rate},
        {7, "cell estimate bands", 1800, cell_estimates},
        {8, "tangency and circulation", 120, tangency_circulation},
        {9, "two-vortex co-rotation", 60, two_vortex_oracle},
        {10, "stability trend", 3600, stability_trend},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const bool in_time = secs < c.time_limit_s;
        const bool pass = out.pass && in_time;
        if (!pass) ++failures;
        std::printf("criterion %2d [%s] %s: %s (%.1fs < %.0fs)\n", c.id, pass ? "PASS" : "FAIL",
                    c.name, out.detail.c_str(), secs, c.time_limit_s);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
