#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rowperm/conformal.hpp"
#include "rowperm/fields.hpp"
#include "rowperm/geometry.hpp"

namespace rowperm {

/// Transported vortex blobs; weights are fixed circulations.
struct BlobEnsemble {
    std::vector<Vec2> positions;
    std::vector<double> weights;
    double core_radius = 0.0; // algebraic desingularization scale
    double time = 0.0;

    double total_circulation() const;
    Vec2 vorticity_center() const;
    double second_moment() const;
};

/// Seeds blobs on a square grid over supp f; weight = f(x) h^2, core = 2h.
BlobEnsemble seed_blobs(const VorticityField& f, double spacing);

/// Velocity induced by the ensemble with the algebraic blob kernel
/// (x-y)^perp / (|x-y|^2 + core^2); self-term vanishes.
Vec2 blob_velocity(const BlobEnsemble& blobs, Vec2 x);
/// Stream function of the same field.
double blob_stream(const BlobEnsemble& blobs, Vec2 x);

/// Method-of-reflections closure for the perforated-domain velocity: each
/// pass replaces the field near hole i by the single-obstacle exterior
/// solution of the current incident field, until the boundary-normal
/// residual converges.
class ReflectionSolver {
public:
    ReflectionSolver(PorousLattice lattice, ConformalMap base_map, int modes = 64,
                     int boundary_nodes = 128, double tol = 1e-6);

    /// Recomputes hole corrections for the given ensemble (kept by copy for
    /// later velocity evaluations). Returns the pass count used. Throws
    /// ReflectionsDiverged when the residual stagnates above the tolerance.
    int solve(const BlobEnsemble& blobs);

    /// Blob field of the last solved ensemble plus all hole corrections.
    Vec2 velocity(Vec2 x) const;
    /// Tagged evaluator of the solved field; keeps a reference to the solver.
    VelocityField reflected_field() const {
        return {[this](Vec2 x) { return velocity(x); }, "reflected"};
    }
    /// Correction field of one hole (zero before the first solve).
    Vec2 correction(int hole, Vec2 x) const;
    double achieved_residual() const { return achieved_residual_; }
    /// Circulation of the solved field around hole i on an offset contour.
    double hole_circulation(int i) const;
    const PorousLattice& lattice() const { return lattice_; }

private:
    Vec2 correction_from_map(int hole, Cpx t, Cpx dt) const;
    double stream_of_correction(int hole, Cpx t) const;
    double boundary_residual(const BlobEnsemble& blobs) const;

    PorousLattice lattice_;
    ConformalMap base_map_;
    std::vector<ConformalMap> hole_maps_;
    int modes_;
    int nodes_;
    double tol_;
    double achieved_residual_ = 0.0;
    BlobEnsemble last_;

    // static geometry caches
    std::vector<std::vector<Vec2>> bnodes_;        // [hole][node] boundary points
    std::vector<std::vector<Vec2>> bnormals_;      // outward unit normals
    std::vector<std::vector<std::vector<Cpx>>> t_cross_;  // [j][i][m] = T_j at node m of hole i
    std::vector<std::vector<std::vector<Cpx>>> dt_cross_; // T_j' at the same points
    std::vector<std::vector<Cpx>> coeffs_;         // [hole][mode] Laurent coefficients
};

/// Operation-shaped convenience: solves reflections for this ensemble and
/// evaluates at x.
Vec2 velocity_perforated(const PorousLattice& lattice, const ConformalMap& map,
                         const BlobEnsemble& blobs, Vec2 x, double tol);

/// Ensemble-level velocity oracle: positions -> velocities at time t.
using EnsembleVelocity =
    std::function<std::vector<Vec2>(const std::vector<Vec2>& positions, double t)>;

/// RK4 transport with a CFL-style guard dt max|u| <= core radius. When
/// `lattice` is given, positions entering a hole raise BlobEnteredHole.
/// on_step runs after every accepted step.
BlobEnsemble advect(BlobEnsemble blobs, const EnsembleVelocity& velocity, double dt, double t_end,
                    const PorousLattice* lattice = nullptr,
                    const std::function<void(const BlobEnsemble&)>& on_step = {});

struct TrajectorySample {
    double t = 0.0;
    int seed_id = 0;
    Vec2 plane;
    Vec2 perforated;
    double gap = 0.0;
};

struct StabilityReport {
    double sup_traj_gap = 0.0;   // sup over time and seeds of |X^eps - X|
    double vorticity_gap = 0.0;  // transported-value proxy for |w^eps - w|_inf
    double velocity_gap = 0.0;   // sup over probe points and sampled times
    bool support_hit = false;    // perforated support reached the guard collar
    double t_hit = 0.0;
    double t_end = 0.0;
    int reflection_passes_max = 0;
    std::vector<TrajectorySample> series;
    std::vector<double> per_seed_sup_gap;
};

/// Runs the whole-plane and perforated flows from identical seeds and
/// collects the stability quantities. The vorticity support must keep a
/// distance of at least 0.3 from the unit segment.
StabilityReport stability_report(const VorticityField& omega0, const PorousLattice& lattice,
                                 const ConformalMap& map, double t_end, double dt,
                                 double seed_spacing = 0.0, int snapshot_every = 5);

} // namespace rowperm
