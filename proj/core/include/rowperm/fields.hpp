#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rowperm/conformal.hpp"
#include "rowperm/quadrature.hpp"
#include "rowperm/vec2.hpp"

namespace rowperm {

class PorousLattice;

/// Disk-shaped smooth piece of a catalog field: the evaluator is radially
/// structured on B(center, radius) with derivative kinks only at the
/// listed radii. Lets the quadrature place breakpoints exactly.
struct RadialPiece {
    Vec2 center;
    double radius = 0.0;
    std::vector<double> kink_radii; // includes the outer radius
};

/// Compactly supported C^1 scalar vorticity with cached norms.
struct VorticityField {
    std::function<double(Vec2)> evaluator;
    Rect support_box;
    double l1_norm = 0.0;
    double linf_norm = 0.0;
    double grad_linf_norm = 0.0;
    double total_mass = 0.0;
    std::string spec;                       // catalog name this field was built from
    std::vector<RadialPiece> radial_pieces; // empty for fields without known structure

    double operator()(Vec2 p) const { return evaluator(p); }
    /// The norm the permeability constant multiplies.
    double l1linf() const { return l1_norm > linf_norm ? l1_norm : linf_norm; }
};

/// Mass-normalized radial C^1 bump (1 - |x-c|^2/r^2)^2 on B(c, r).
VorticityField bump_field(Vec2 center, double radius);
/// Indicator of B(c, r) mollified at the fixed scale 1e-3.
VorticityField mollified_disk_field(Vec2 center, double radius);
/// Two opposite bumps.
VorticityField dipole_field(Vec2 center_plus, Vec2 center_minus, double radius);
/// Catalog: "bump:cx,cy,r", "mollified-disk:cx,cy,r", "dipole:px,py,mx,my,r".
VorticityField field_by_name(const std::string& spec);

/// Velocity evaluator with a provenance tag.
struct VelocityField {
    std::function<Vec2(Vec2)> evaluator;
    std::string provenance; // whole-plane | exterior-one-obstacle | corrector | reflected
    Vec2 operator()(Vec2 p) const { return evaluator(p); }
};

/// Fixed tensor quadrature grid over supp f, shared across evaluation points
/// so that pointwise identities are preserved exactly by the discretization.
struct SourceGrid {
    std::vector<Vec2> nodes;
    std::vector<double> weights; // quadrature weight times f value
    double mass = 0.0;

    static SourceGrid build(const VorticityField& f, int panels_per_side, int order);
    /// Polar tensor grid aligned with the field's radial pieces; kernels
    /// evaluated against it converge spectrally for separated targets.
    static SourceGrid build_polar(const VorticityField& f, int radial_order, int angular_nodes);
    /// Polar grid when the radial structure is known (and pieces disjoint),
    /// cartesian panels with mass-convergence control otherwise.
    static SourceGrid build_auto(const VorticityField& f, double tol);
};

/// Whole-plane Biot-Savart velocity by adaptive polar quadrature around x
/// (the kernel singularity cancels in polar coordinates).
Vec2 biot_savart(const VorticityField& f, Vec2 x, double tol);

/// Plain kernel sum over a precomputed grid. Caller keeps x away from the
/// nodes; intended for evaluation points separated from supp f.
Vec2 biot_savart(const SourceGrid& grid, Vec2 x);

/// Tagged whole-plane evaluator for a field.
VelocityField whole_plane_field(const VorticityField& f, double tol);

/// Dirichlet Green function of the obstacle exterior through the map:
/// (1/2pi) ln( |T(x)-T(y)| / (|T(x)-T(y)*| |T(y)|) ).
double green_exterior(const ConformalMap& map, Vec2 x, Vec2 y);

/// Zero-circulation exterior velocity of a point vortex of strength gamma
/// at y: analytic gradient of the Green function plus the harmonic term.
Vec2 point_vortex_exterior_velocity(const ConformalMap& map, Vec2 y, double gamma, Vec2 x);

/// Zero-circulation exterior flow for a distributed vorticity; precomputes
/// the source grid and its images so repeated evaluations are cheap.
class ExteriorFlow {
public:
    ExteriorFlow(ConformalMap map, const VorticityField& f, const QuadratureSpec& spec = {});

    /// Divergence-free, boundary-tangent, zero-circulation velocity.
    Vec2 velocity(Vec2 x) const;
    /// Tagged evaluator (shares this flow's precomputed state).
    VelocityField as_field() const;
    double mass() const { return grid_.mass; }
    const SourceGrid& grid() const { return grid_; }
    const ConformalMap& map() const { return map_; }

private:
    ConformalMap map_;
    const VorticityField* field_;
    SourceGrid grid_;
    std::vector<Cpx> t_nodes_;      // T(y_q)
    std::vector<Cpx> t_nodes_conj_; // T(y_q)^*
    double quad_tol_;
};

/// Convenience single-point form; builds an ExteriorFlow internally.
Vec2 exterior_velocity(const ConformalMap& map, const VorticityField& f, Vec2 x, double tol);

/// Trapezoid line integral of u . tau over a closed polyline. Throws
/// ContourHitsObstacle when a node is not in the fluid of `lattice`
/// (pass nullptr to skip the check).
double circulation(const std::function<Vec2(Vec2)>& u, std::span<const Vec2> contour,
                   const PorousLattice* lattice = nullptr);

/// Closed circular contour helper.
std::vector<Vec2> circle_contour(Vec2 center, double radius, int nodes);

} // namespace rowperm
