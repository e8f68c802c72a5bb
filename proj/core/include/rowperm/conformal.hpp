#pragma once

#include <memory>

#include "rowperm/geometry.hpp"
#include "rowperm/vec2.hpp"

namespace rowperm {

namespace detail {
struct MapImpl;
}

/// Conformal bijection T from the obstacle exterior onto {|w| > 1} with
/// T(inf) = inf and T'(inf) = beta real positive. Immutable and reentrant.
class ConformalMap {
public:
    enum class Kind { Identity, ExteriorSC, Rescaled };

    Kind kind() const { return kind_; }
    double beta() const { return beta_; }
    /// sup |T(x) - beta x| over the far region |x| >= 5 (numerical estimate).
    double remainder_bound() const { return remainder_bound_; }
    /// Corner-separation radius: (1/6) min pairwise corner distances in
    /// both planes; infinity for a smooth boundary.
    double delta0() const { return delta0_; }

    Cpx forward(Cpx x) const;
    Cpx inverse(Cpx w) const;
    Cpx derivative(Cpx x) const;
    /// T(x) and T'(x) with a single inversion.
    std::pair<Cpx, Cpx> forward_and_derivative(Cpx x) const;
    /// Warm-started variant for evaluation sweeps along nearby points;
    /// `hint` is a previous image value.
    std::pair<Cpx, Cpx> forward_and_derivative_hinted(Cpx x, Cpx hint) const;

    Vec2 forward(Vec2 x) const { return to_vec(forward(to_cpx(x))); }
    Vec2 inverse(Vec2 w) const { return to_vec(inverse(to_cpx(w))); }

    /// Internal representation; owned jointly by copies of the map.
    std::shared_ptr<const detail::MapImpl> impl() const { return impl_; }

    ConformalMap(Kind kind, std::shared_ptr<const detail::MapImpl> impl, double beta,
                 double remainder_bound, double delta0)
        : kind_(kind), impl_(std::move(impl)), beta_(beta),
          remainder_bound_(remainder_bound), delta0_(delta0) {}

private:
    Kind kind_;
    std::shared_ptr<const detail::MapImpl> impl_;
    double beta_ = 1.0;
    double remainder_bound_ = 0.0;
    double delta0_ = 0.0;
};

/// Numerical certificate of the corner behavior of |T'|.
struct CornerAsymptotics {
    int corner_index = 0;
    double fitted_exponent = 0.0;    // slope of log|T'| vs log r on the bisector ray
    double predicted_exponent = 0.0; // pi/theta_k - 1
    double holder_mu = 0.0;          // min_k pi/theta_k
};

struct HolderProbe {
    double mu_hat = 0.0; // empirical worst-case exponent
    double m_hat = 0.0;  // smallest constant making the inequality hold on the sample
};

/// Identity map for the disk, exterior Schwarz-Christoffel map for polygons.
/// Throws UnsupportedShape for Custom shapes and ParameterProblemDiverged
/// when the prevertex solve cannot reach the residual target.
ConformalMap map_for_shape(const ObstacleShape& shape);

/// Inversion across the unit circle, y |-> y / |y|^2.
Vec2 conjugate_point(Vec2 y);
Cpx conjugate_point(Cpx y);

/// Fits log|T'| against log r along the interior fluid bisector of corner k,
/// r in [1e-4, 1e-2].
CornerAsymptotics probe_corner_exponent(const ConformalMap& map, const ObstacleShape& shape,
                                        int corner_index);

/// Empirical Hoelder data over random pairs in a radius-3 collar of the
/// obstacle exterior. Deterministic (fixed sampling stream).
HolderProbe probe_holder(const ConformalMap& map, const ObstacleShape& shape, int n_pairs);

/// Map of the inclusion center + (eps/2) K: forward composes with the affine
/// rescaling, the derivative picks up a 2/eps factor, beta is unchanged.
ConformalMap rescaled_map(const ConformalMap& map, Vec2 center, double epsilon);

} // namespace rowperm
