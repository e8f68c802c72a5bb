#include "rowperm/experiments.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rowperm/conformal.hpp"
#include "rowperm/errors.hpp"
#include "rowperm/util.hpp"

namespace rowperm {

double permeability_bound(double epsilon, double d_eps) {
    return std::sqrt(d_eps + epsilon * std::abs(std::log(d_eps)));
}

std::vector<RateRecord> rate_sweep(std::shared_ptr<const ObstacleShape> shape,
                                   const VorticityField& f, std::span<const double> eps_list,
                                   const std::function<double(double)>& d_rule,
                                   const QuadratureSpec& spec) {
    const ConformalMap map = map_for_shape(*shape);
    std::vector<RateRecord> records;
    for (double eps : eps_list) {
        const double d = d_rule(eps);
        if (d <= 0) throw NonPositiveScale("d_rule produced a non-positive distance");
        const auto t0 = std::chrono::steady_clock::now();
        PorousLattice lattice = build_lattice(shape, eps, d);
        if (lattice.n_holes() > kMaxHoles)
            throw QuadratureBudgetExceeded("N_eps = " + std::to_string(lattice.n_holes()) +
                                           " exceeds the desk-scale cap of " +
                                           std::to_string(kMaxHoles) + " holes");
        CorrectorAssembly assembly(lattice, map, f, spec);
        RateRecord rec;
        rec.epsilon = eps;
        rec.d_eps = d;
        rec.n_holes = lattice.n_holes();
        rec.residual_l2 = residual_l2(assembly, spec);
        rec.bound = permeability_bound(eps, d);
        rec.ratio = rec.residual_l2 / rec.bound;
        rec.f_l1linf = f.l1linf();
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        records.push_back(rec);
    }
    return records;
}

RateFit fit_rate(std::span<const RateRecord> records) {
    if (records.size() < 3) throw InvalidArgument("fit_rate needs at least 3 records");
    std::vector<double> lx, ly;
    for (const RateRecord& r : records) {
        lx.push_back(std::log(r.bound));
        ly.push_back(std::log(r.residual_l2));
    }
    double spread = 0.0;
    for (double v : lx) spread = std::max(spread, std::abs(v - lx[0]));
    if (spread < 1e-12) throw DegenerateFit("all bounds coincide; no rate to fit");
    const LineFit f = fit_line(lx, ly);
    RateFit out;
    out.fitted_exponent = f.slope;
    out.constant = std::exp(f.intercept);
    out.r_squared = f.r_squared;
    return out;
}

std::vector<CutoffNormRow> cutoff_norm_table(std::span<const double> eps_list,
                                             const std::function<double(double)>& d_rule,
                                             double rho) {
    std::vector<CutoffNormRow> rows;
    for (double eps : eps_list) {
        const double d = d_rule(eps);
        Cutoff cut = (d < eps) ? cutoff_corner(eps, d, rho) : cutoff_smooth(eps, std::min(1.0, d / eps));
        CutoffNormRow row;
        row.epsilon = eps;
        row.d_eps = d;
        row.l4 = cut.l4_norm();
        row.grad_l2 = cut.grad_l2_norm();
        row.grad_sq_over_log = cut.grad_l2_norm() * cut.grad_l2_norm() / (1.0 + std::log(eps / d));
        rows.push_back(row);
    }
    return rows;
}

std::vector<CellRow> cell_table(const CorrectorAssembly& assembly, const QuadratureSpec& spec) {
    const int n = assembly.lattice().n_holes();
    const double eps = assembly.lattice().epsilon();
    const double d = assembly.lattice().d_eps();
    const double l4_scale = std::pow(eps, 0.25) * (std::pow(eps, 0.25) + std::pow(d, 0.25));
    std::vector<CellRow> rows;
    rows.resize(std::size_t(n));
    parallel_for(std::size_t(n), thread_count(), [&](std::size_t i) {
        CellRow row;
        row.hole = int(i);
        row.norms = cell_norms(assembly, int(i), spec);
        row.sup_w1_over_eps = row.norms.sup_w1 / eps;
        row.sup_w2_over_eps = row.norms.sup_w2 / eps;
        row.l4_w3_normalized = row.norms.l4_w3 / l4_scale;
        row.l4_w4_normalized = row.norms.l4_w4 / l4_scale;
        rows[i] = row;
    });
    return rows;
}

std::string rates_csv(std::span<const RateRecord> records) {
    std::ostringstream out;
    out << "epsilon,d_eps,n_holes,residual_l2,bound,ratio,f_l1linf,wall_ms\n";
    for (const RateRecord& r : records) {
        out << format_double(r.epsilon) << ',' << format_double(r.d_eps) << ',' << r.n_holes << ','
            << format_double(r.residual_l2) << ',' << format_double(r.bound) << ','
            << format_double(r.ratio) << ',' << format_double(r.f_l1linf) << ','
            << format_double(r.wall_ms) << '\n';
    }
    return out.str();
}

std::string cutoff_csv(std::span<const CutoffNormRow> rows) {
    std::ostringstream out;
    out << "epsilon,d_eps,phi_l4,grad_phi_l2,grad_sq_over_log\n";
    for (const CutoffNormRow& r : rows) {
        out << format_double(r.epsilon) << ',' << format_double(r.d_eps) << ','
            << format_double(r.l4) << ',' << format_double(r.grad_l2) << ','
            << format_double(r.grad_sq_over_log) << '\n';
    }
    return out.str();
}

std::string cell_csv(std::span<const CellRow> rows) {
    std::ostringstream out;
    out << "hole,sup_w1,sup_w2,l4_w3,l4_w4,sup_w1_over_eps,sup_w2_over_eps,l4_w3_norm,l4_w4_norm\n";
    for (const CellRow& r : rows) {
        out << r.hole << ',' << format_double(r.norms.sup_w1) << ',' << format_double(r.norms.sup_w2)
            << ',' << format_double(r.norms.l4_w3) << ',' << format_double(r.norms.l4_w4) << ','
            << format_double(r.sup_w1_over_eps) << ',' << format_double(r.sup_w2_over_eps) << ','
            << format_double(r.l4_w3_normalized) << ',' << format_double(r.l4_w4_normalized) << '\n';
    }
    return out.str();
}

std::string corner_probe_csv(const ConformalMap& map, const ObstacleShape& shape, int corner) {
    const auto& c = shape.corners().at(std::size_t(corner));
    const Vec2 t_in = shape.tangent_before(c.param);
    const Vec2 t_out = shape.tangent_after(c.param);
    Vec2 solid = t_out - t_in;
    const Vec2 bis = -1.0 / solid.norm() * solid;
    const double predicted = std::numbers::pi / c.angle - 1.0;

    std::ostringstream out;
    out << "r,abs_dT,predicted,fitted_running\n";
    std::vector<double> lr, ld;
    const int npts = 25;
    for (int i = 0; i < npts; ++i) {
        const double r = 1e-4 * std::pow(100.0, double(i) / (npts - 1));
        const Vec2 x = c.point + r * bis;
        const double dT = std::abs(map.derivative(to_cpx(x)));
        lr.push_back(std::log(r));
        ld.push_back(std::log(dT));
        const double running = (lr.size() >= 2) ? fit_line(lr, ld).slope : 0.0;
        out << format_double(r) << ',' << format_double(dT) << ',' << format_double(predicted)
            << ',' << format_double(running) << '\n';
    }
    return out.str();
}

std::vector<SweepPoint> default_sweep() {
    const double eps_list[] = {0.2, 0.1, 0.05, 0.025};
    std::vector<SweepPoint> pts;
    for (double eps : eps_list) pts.push_back({eps, eps});
    for (double eps : eps_list) pts.push_back({eps, eps * eps});
    for (double eps : eps_list) pts.push_back({eps, eps * eps * eps});
    for (double eps : eps_list) pts.push_back({eps, std::exp(-1.0 / std::sqrt(eps))});
    return pts;
}

} // namespace rowperm
