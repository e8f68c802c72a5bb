#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rowperm/vec2.hpp"

namespace rowperm {

class PorousLattice;

/// Knobs shared by the integration routines.
struct QuadratureSpec {
    double abs_tol = 1e-7;
    int max_subdivisions = 12;
    int base_order = 8; // Gauss-Legendre points per cell and direction
};

/// Nodes/weights of a one-dimensional quadrature rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    /// Integrates fn over [a, b] (affine change of variables).
    template <class F>
    double apply(double a, double b, F&& fn) const {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            s += weights[i] * fn(mid + half * nodes[i]);
        return s * half;
    }
};

/// n-point Gauss-Legendre rule; cached per n.
const GaussRule& gauss_legendre(int n);

/// n-point Gauss-Jacobi rule for the weight (1-x)^alpha (1+x)^beta.
/// The weight is ABSORBED into the returned weights: sum w_i g(x_i)
/// approximates the integral of (1-x)^alpha (1+x)^beta g(x).
GaussRule gauss_jacobi(int n, double alpha, double beta);

/// Splits [a, b] into panels geometrically graded toward `a` with the
/// smallest panel of width about `finest` and the given growth ratio.
std::vector<double> graded_breakpoints(double a, double b, double finest, int max_panels = 40,
                                       double ratio = 2.0);

/// Scalar integral of fn over a rectangle with a fixed tensor rule.
double integrate_rect(const std::function<double(Vec2)>& fn, const Rect& r, int order);

/// Adaptive scalar integral over rectangles minus lattice holes.
/// Cells straddling a hole boundary are split until small, then classified
/// by membership subsampling. Throws QuadratureBudgetExceeded when the
/// subdivision budget runs out before the tolerance is met.
double integrate_region(const std::function<double(Vec2)>& fn, std::span<const Rect> region,
                        const PorousLattice* holes, const QuadratureSpec& spec);

/// sqrt of the integral of |g|^2 over the region (fluid part only).
double l2_norm_region(const std::function<Vec2(Vec2)>& g, std::span<const Rect> region,
                      const PorousLattice* holes, const QuadratureSpec& spec);

/// Dense-grid maximum of g with one local refinement pass around the
/// top decile of coarse samples.
double sup_norm_region(const std::function<double(Vec2)>& g, std::span<const Rect> region,
                       const QuadratureSpec& spec);

} // namespace rowperm
