#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rowperm/conformal.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/quadrature.hpp"

namespace rowperm {

/// Cutoff blending the whole-plane stream function with the per-hole
/// exterior one. Centered at the origin; translate by the hole center.
class Cutoff {
public:
    enum class Regime { SmoothSquare, CornerAdapted };

    Regime regime() const { return regime_; }
    double epsilon() const { return epsilon_; }
    double d_eps() const { return d_eps_; }
    double delta() const { return delta_; }
    double rho() const { return rho_; }
    double l4_norm() const { return l4_norm_; }
    double grad_l2_norm() const { return grad_l2_norm_; }
    Rect support_box() const { return support_box_; }

    /// Value in [0, 1]; identically 1 on (eps/2) dK, 0 outside the support.
    double phi(Vec2 x) const;
    /// Piecewise-analytic gradient; one-sided values on the kink lines.
    Vec2 grad_phi(Vec2 x) const;

    /// Piece structure for exact integration over the support (upper half;
    /// the cutoff is even in x2). Breakpoints of the x2 panels, then the
    /// x1 intervals of the support at a given height.
    std::vector<double> x2_breakpoints() const;
    struct Span {
        double a, b;
    };
    std::vector<Span> x1_pieces(double x2) const;

    static Cutoff smooth(double epsilon, double delta);
    static Cutoff corner(double epsilon, double d_eps, double rho);

private:
    Cutoff() = default;
    void compute_norms();

    Regime regime_ = Regime::SmoothSquare;
    double epsilon_ = 0.0, d_eps_ = 0.0, delta_ = 1.0, rho_ = 0.0;
    double l4_norm_ = 0.0, grad_l2_norm_ = 0.0;
    Rect support_box_;
};

/// Smooth tensor cutoff for the regime d_eps / eps >= delta.
Cutoff cutoff_smooth(double epsilon, double delta);
/// Slanted cutoff for d_eps < eps, fitting the wedge left free by the
/// hypothesis (H2); rho must be in (0, 1).
Cutoff cutoff_corner(double epsilon, double d_eps, double rho);

/// Cell terms of one hole, evaluated against the shared source grid.
struct CellTerms {
    int hole = 0;
    std::function<double(Vec2)> w1, w2;
    std::function<Vec2(Vec2)> w3, w4;
};

/// Precomputed pipeline for one (lattice, map, vorticity) triple: shared
/// source quadrature, per-hole rescaled map images, cutoff. All evaluators
/// are pure; members are immutable after construction.
class CorrectorAssembly {
public:
    CorrectorAssembly(PorousLattice lattice, ConformalMap base_map, const VorticityField& f,
                      const QuadratureSpec& spec, std::optional<Cutoff> cutoff_override = {});

    const PorousLattice& lattice() const { return lattice_; }
    const Cutoff& cutoff() const { return cutoff_; }
    const SourceGrid& grid() const { return grid_; }
    const VorticityField& field() const { return *field_; }
    double beta() const { return base_map_.beta(); }

    double phi(int i, Vec2 x) const { return cutoff_.phi(x - lattice_.centers()[std::size_t(i)]); }
    Vec2 grad_phi(int i, Vec2 x) const {
        return cutoff_.grad_phi(x - lattice_.centers()[std::size_t(i)]);
    }
    Rect support_box(int i) const;

    /// Whole-plane Biot-Savart velocity over the shared grid.
    Vec2 whole_plane_velocity(Vec2 x) const { return biot_savart(grid_, x); }
    /// The corrected velocity v^eps[f].
    Vec2 corrector_velocity(Vec2 x) const;

    /// Map data at an evaluation point near hole i (one inversion).
    struct MapData {
        Cpx tx, dtx;
    };
    MapData map_data(int i, Vec2 x) const;
    MapData map_data(int i, Vec2 x, Cpx hint) const;

    double w1(int i, Vec2 x) const { return w1(i, x, map_data(i, x)); }
    double w2(int i, Vec2 x) const { return w2(i, x, map_data(i, x)); }
    Vec2 w3(int i, Vec2 x) const { return w3(i, x, map_data(i, x)); }
    Vec2 w4(int i, Vec2 x) const { return w4(i, x, map_data(i, x)); }
    double w1(int i, Vec2 x, const MapData& m) const;
    double w2(int i, Vec2 x, const MapData& m) const;
    Vec2 w3(int i, Vec2 x, const MapData& m) const;
    Vec2 w4(int i, Vec2 x, const MapData& m) const;

    /// (1/2pi) [grad_perp phi_i (w1+w2) + phi_i (w3+w4)] at x.
    Vec2 residual_via_cells(int i, Vec2 x) const;
    /// K[f] - v^eps[f], assembled from the two velocity routes.
    Vec2 residual_direct(Vec2 x) const { return whole_plane_velocity(x) - corrector_velocity(x); }

    /// Tagged evaluator of v^eps[f]; keeps a reference to this assembly.
    VelocityField corrector_field() const {
        return {[this](Vec2 x) { return corrector_velocity(x); }, "corrector"};
    }

    /// Heights (positive, in hole-local coordinates) of shape corners,
    /// used for graded quadrature panels.
    const std::vector<double>& corner_heights() const { return corner_heights_; }
    /// Chord [a, b] of hole i at local height x2, in hole-local coordinates.
    std::optional<std::pair<double, double>> hole_chord(double x2_local) const;

private:
    PorousLattice lattice_;
    ConformalMap base_map_;
    const VorticityField* field_;
    Cutoff cutoff_;
    SourceGrid grid_;
    std::vector<std::vector<Cpx>> t_nodes_;      // [hole][source node]
    std::vector<std::vector<Cpx>> t_nodes_conj_;
    std::vector<ConformalMap> hole_maps_;
    std::vector<double> corner_heights_;
};

/// Regime switch from the geometry: corner-adapted when d_eps < eps.
Cutoff default_cutoff(const PorousLattice& lattice);

/// Operation-shaped conveniences (each builds the full assembly).
Vec2 corrector_velocity(const PorousLattice& lattice, const ConformalMap& map,
                        const Cutoff& cutoff, const VorticityField& f, Vec2 x, double tol);
CellTerms cell_terms(const PorousLattice& lattice, const ConformalMap& map,
                     const VorticityField& f, int hole);

/// L2 norm of K[f] - v^eps[f] over the fluid domain, integrated piecewise
/// over the cutoff supports (the residual vanishes identically outside).
double residual_l2(const CorrectorAssembly& assembly, const QuadratureSpec& spec);

/// Structured norms of the cell terms on the support of one cutoff.
struct CellNorms {
    double sup_w1 = 0.0;
    double sup_w2 = 0.0;
    double l4_w3 = 0.0;
    double l4_w4 = 0.0;
};
CellNorms cell_norms(const CorrectorAssembly& assembly, int hole, const QuadratureSpec& spec);

} // namespace rowperm
