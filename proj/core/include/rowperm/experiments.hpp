#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rowperm/corrector.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"

namespace rowperm {

/// One sweep point of the permeability experiment.
struct RateRecord {
    double epsilon = 0.0;
    double d_eps = 0.0;
    int n_holes = 0;
    double residual_l2 = 0.0;
    double bound = 0.0; // (d_eps + eps |ln d_eps|)^{1/2}
    double ratio = 0.0;
    double f_l1linf = 0.0;
    double wall_ms = 0.0;
};

struct RateFit {
    double fitted_exponent = 0.0; // slope of ln(residual) on ln(bound)
    double constant = 0.0;
    double r_squared = 0.0;
};

/// sqrt(d + eps |ln d|); the log vanishes at d = 1.
double permeability_bound(double epsilon, double d_eps);

/// Max inclusions kept desk-scale; larger lattices are rejected.
inline constexpr int kMaxHoles = 64;

/// Runs the full corrector pipeline for each epsilon with d = d_rule(eps).
std::vector<RateRecord> rate_sweep(std::shared_ptr<const ObstacleShape> shape,
                                   const VorticityField& f, std::span<const double> eps_list,
                                   const std::function<double(double)>& d_rule,
                                   const QuadratureSpec& spec);

/// Least squares of ln(residual) on ln(bound). Throws DegenerateFit when
/// the bounds do not vary.
RateFit fit_rate(std::span<const RateRecord> records);

struct CutoffNormRow {
    double epsilon = 0.0;
    double d_eps = 0.0;
    double l4 = 0.0;
    double grad_l2 = 0.0;
    double grad_sq_over_log = 0.0; // |grad phi|_{L2}^2 / (1 + ln(eps/d))
};

std::vector<CutoffNormRow> cutoff_norm_table(std::span<const double> eps_list,
                                             const std::function<double(double)>& d_rule,
                                             double rho);

struct CellRow {
    int hole = 0;
    CellNorms norms;
    double sup_w1_over_eps = 0.0;
    double sup_w2_over_eps = 0.0;
    double l4_w3_normalized = 0.0; // / (eps^{1/4} (eps^{1/4} + d^{1/4}))
    double l4_w4_normalized = 0.0;
};

std::vector<CellRow> cell_table(const CorrectorAssembly& assembly, const QuadratureSpec& spec);

/// Fixed-header CSV renderings (shortest round-trip decimals).
std::string rates_csv(std::span<const RateRecord> records);
std::string cutoff_csv(std::span<const CutoffNormRow> rows);
std::string cell_csv(std::span<const CellRow> rows);
std::string corner_probe_csv(const ConformalMap& map, const ObstacleShape& shape, int corner);

/// Default sweep: eps in {0.2, 0.1, 0.05, 0.025} against the rules
/// d = eps, eps^2, eps^3, exp(-1/sqrt(eps)).
struct SweepPoint {
    double epsilon, d_eps;
};
std::vector<SweepPoint> default_sweep();

} // namespace rowperm
