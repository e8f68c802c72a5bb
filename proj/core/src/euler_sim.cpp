#include "rowperm/euler_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rowperm/errors.hpp"
#include "rowperm/util.hpp"

namespace rowperm {

namespace {
constexpr double kPi = std::numbers::pi;
}

double BlobEnsemble::total_circulation() const { return pairwise_sum(weights); }

Vec2 BlobEnsemble::vorticity_center() const {
    Vec2 acc{0, 0};
    double mass = 0;
    for (std::size_t p = 0; p < positions.size(); ++p) {
        acc += weights[p] * positions[p];
        mass += weights[p];
    }
    return mass != 0.0 ? acc / mass : acc;
}

double BlobEnsemble::second_moment() const {
    double acc = 0;
    for (std::size_t p = 0; p < positions.size(); ++p) acc += weights[p] * positions[p].norm2();
    return acc;
}

BlobEnsemble seed_blobs(const VorticityField& f, double spacing) {
    if (spacing <= 0) throw InvalidArgument("seed spacing must be positive");
    BlobEnsemble out;
    out.core_radius = 2.0 * spacing;
    const Rect& box = f.support_box;
    const int nx = int(box.width() / spacing) + 1;
    const int ny = int(box.height() / spacing) + 1;
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const Vec2 p{box.lo.x + (i + 0.5) * spacing, box.lo.y + (j + 0.5) * spacing};
            const double w = f.evaluator(p) * spacing * spacing;
            if (w == 0.0) continue;
            out.positions.push_back(p);
            out.weights.push_back(w);
        }
    }
    return out;
}

Vec2 blob_velocity(const BlobEnsemble& blobs, Vec2 x) {
    const double d2 = blobs.core_radius * blobs.core_radius;
    Vec2 acc{0, 0};
    for (std::size_t p = 0; p < blobs.positions.size(); ++p) {
        const Vec2 d = x - blobs.positions[p];
        acc += (blobs.weights[p] / (d.norm2() + d2)) * d.perp();
    }
    return acc / (2 * kPi);
}

double blob_stream(const BlobEnsemble& blobs, Vec2 x) {
    const double d2 = blobs.core_radius * blobs.core_radius;
    double acc = 0;
    for (std::size_t p = 0; p < blobs.positions.size(); ++p)
        acc += blobs.weights[p] * std::log((x - blobs.positions[p]).norm2() + d2);
    return acc / (4 * kPi);
}

// ---------------------------------------------------------------------------
// ReflectionSolver

ReflectionSolver::ReflectionSolver(PorousLattice lattice, ConformalMap base_map, int modes,
                                   int boundary_nodes, double tol)
    : lattice_(std::move(lattice)), base_map_(std::move(base_map)), modes_(modes),
      nodes_(boundary_nodes), tol_(tol) {
    const int n = lattice_.n_holes();
    modes_ = std::min(modes_, nodes_ / 2 - 1);
    hole_maps_.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i)
        hole_maps_.push_back(rescaled_map(base_map_, lattice_.centers()[std::size_t(i)],
                                          lattice_.epsilon()));

    // Boundary nodes live at uniform angles in the map plane; staggered so
    // corner prevertices are avoided.
    bnodes_.assign(std::size_t(n), {});
    bnormals_.assign(std::size_t(n), {});
    parallel_for(std::size_t(n), thread_count(), [&](std::size_t i) {
        auto& pts = bnodes_[i];
        auto& nrm = bnormals_[i];
        pts.resize(std::size_t(nodes_));
        nrm.resize(std::size_t(nodes_));
        for (int m = 0; m < nodes_; ++m) {
            const double theta = 2 * kPi * (m + 0.37) / nodes_;
            const Cpx w = std::polar(1.0, theta);
            const Cpx x = to_cpx(hole_maps_[i].inverse(to_vec(w)));
            pts[std::size_t(m)] = to_vec(x);
            const Cpx dT = hole_maps_[i].derivative(x);
            const Cpx normal = w / dT; // G'(w) e^{i theta} direction
            nrm[std::size_t(m)] = to_vec(normal / std::abs(normal));
        }
    });

    // Cross maps: T_j and T_j' at every node of every other hole.
    t_cross_.assign(std::size_t(n), std::vector<std::vector<Cpx>>(std::size_t(n)));
    dt_cross_.assign(std::size_t(n), std::vector<std::vector<Cpx>>(std::size_t(n)));
    parallel_for(std::size_t(n), thread_count(), [&](std::size_t j) {
        for (int i = 0; i < n; ++i) {
            auto& tj = t_cross_[j][std::size_t(i)];
            auto& dtj = dt_cross_[j][std::size_t(i)];
            tj.resize(std::size_t(nodes_));
            dtj.resize(std::size_t(nodes_));
            for (int m = 0; m < nodes_; ++m) {
                auto [t, dt] = hole_maps_[j].forward_and_derivative(to_cpx(bnodes_[std::size_t(i)][std::size_t(m)]));
                tj[std::size_t(m)] = t;
                dtj[std::size_t(m)] = dt;
            }
        }
    });
    coeffs_.assign(std::size_t(n), std::vector<Cpx>(std::size_t(modes_) + 1, Cpx{0, 0}));
}

double ReflectionSolver::stream_of_correction(int hole, Cpx t) const {
    const auto& c = coeffs_[std::size_t(hole)];
    Cpx f{0, 0};
    Cpx winv = 1.0 / t;
    Cpx wp = winv;
    for (int nmode = 1; nmode <= modes_; ++nmode) {
        f += c[std::size_t(nmode)] * wp;
        wp *= winv;
    }
    return c[0].real() + f.real();
}

Vec2 ReflectionSolver::correction_from_map(int hole, Cpx t, Cpx dt) const {
    const auto& c = coeffs_[std::size_t(hole)];
    Cpx fp{0, 0};
    const Cpx winv = 1.0 / t;
    Cpx wp = winv * winv; // w^{-n-1} starting at n = 1
    for (int nmode = 1; nmode <= modes_; ++nmode) {
        fp += -double(nmode) * c[std::size_t(nmode)] * wp;
        wp *= winv;
    }
    return to_vec(Cpx{0, 1} * std::conj(dt * fp));
}

Vec2 ReflectionSolver::correction(int hole, Vec2 x) const {
    auto [t, dt] = hole_maps_[std::size_t(hole)].forward_and_derivative(to_cpx(x));
    return correction_from_map(hole, t, dt);
}

double ReflectionSolver::boundary_residual(const BlobEnsemble& blobs) const {
    const int n = lattice_.n_holes();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < nodes_; ++m) {
            const Vec2 x = bnodes_[std::size_t(i)][std::size_t(m)];
            Vec2 u = blob_velocity(blobs, x);
            for (int j = 0; j < n; ++j)
                u += correction_from_map(j, t_cross_[std::size_t(j)][std::size_t(i)][std::size_t(m)],
                                         dt_cross_[std::size_t(j)][std::size_t(i)][std::size_t(m)]);
            worst = std::max(worst, std::abs(dot(u, bnormals_[std::size_t(i)][std::size_t(m)])));
        }
    }
    return worst;
}

int ReflectionSolver::solve(const BlobEnsemble& blobs) {
    const int n = lattice_.n_holes();
    last_ = blobs;
    for (auto& c : coeffs_) std::fill(c.begin(), c.end(), Cpx{0, 0});

    double prev_residual = 1e300;
    int stagnant = 0;
    for (int pass = 1; pass <= 50; ++pass) {
        // Gauss-Seidel sweep: refresh each hole against the newest field.
        for (int i = 0; i < n; ++i) {
            std::vector<double> g(std::size_t(nodes_), 0.0);
            for (int m = 0; m < nodes_; ++m) {
                const Vec2 x = bnodes_[std::size_t(i)][std::size_t(m)];
                double psi = blob_stream(blobs, x);
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    psi += stream_of_correction(
                        j, t_cross_[std::size_t(j)][std::size_t(i)][std::size_t(m)]);
                }
                g[std::size_t(m)] = -psi;
            }
            auto& c = coeffs_[std::size_t(i)];
            for (int nmode = 0; nmode <= modes_; ++nmode) {
                double a = 0, b = 0;
                for (int m = 0; m < nodes_; ++m) {
                    const double theta = 2 * kPi * (m + 0.37) / nodes_;
                    a += g[std::size_t(m)] * std::cos(nmode * theta);
                    b += g[std::size_t(m)] * std::sin(nmode * theta);
                }
                const double scale = (nmode == 0 ? 1.0 : 2.0) / nodes_;
                c[std::size_t(nmode)] = Cpx{a * scale, b * scale};
            }
        }
        const double res = boundary_residual(blobs);
        achieved_residual_ = res;
        if (res < tol_) return pass;
        if (res > prev_residual * 0.99) {
            if (++stagnant >= 10)
                throw ReflectionsDiverged("boundary residual stalled at " + std::to_string(res) +
                                          " after " + std::to_string(pass) + " passes");
        } else {
            stagnant = 0;
        }
        prev_residual = res;
    }
    throw ReflectionsDiverged("residual " + std::to_string(achieved_residual_) +
                              " above tolerance after 50 passes");
}

Vec2 ReflectionSolver::velocity(Vec2 x) const {
    Vec2 u = blob_velocity(last_, x);
    for (int j = 0; j < lattice_.n_holes(); ++j) u += correction(j, x);
    return u;
}

double ReflectionSolver::hole_circulation(int i) const {
    // Circulation of the correction family around hole i, on the node loop
    // pushed slightly outward along the normals.
    const int n = lattice_.n_holes();
    std::vector<Vec2> contour;
    contour.resize(std::size_t(nodes_));
    const double off = 1e-3 * lattice_.epsilon();
    for (int m = 0; m < nodes_; ++m)
        contour[std::size_t(m)] =
            bnodes_[std::size_t(i)][std::size_t(m)] + off * bnormals_[std::size_t(i)][std::size_t(m)];
    auto u = [&](Vec2 p) {
        Vec2 acc{0, 0};
        for (int j = 0; j < n; ++j) acc += correction(j, p);
        return acc;
    };
    return circulation(u, contour, nullptr);
}

Vec2 velocity_perforated(const PorousLattice& lattice, const ConformalMap& map,
                         const BlobEnsemble& blobs, Vec2 x, double tol) {
    ReflectionSolver solver(lattice, map, 64, 128, tol);
    solver.solve(blobs);
    Vec2 u = blob_velocity(blobs, x);
    for (int j = 0; j < lattice.n_holes(); ++j) u += solver.correction(j, x);
    return u;
}

// ---------------------------------------------------------------------------
// Advection

BlobEnsemble advect(BlobEnsemble blobs, const EnsembleVelocity& velocity, double dt, double t_end,
                    const PorousLattice* lattice,
                    const std::function<void(const BlobEnsemble&)>& on_step) {
    if (dt <= 0) throw InvalidArgument("advect needs dt > 0");
    const std::size_t np = blobs.positions.size();
    std::vector<Vec2> k1, k2, k3, k4, stage(np);
    while (blobs.time < t_end - 1e-12) {
        const double step = std::min(dt, t_end - blobs.time);
        k1 = velocity(blobs.positions, blobs.time);
        double vmax = 0;
        for (const Vec2& v : k1) vmax = std::max(vmax, v.norm());
        if (blobs.core_radius > 0 && vmax * step > blobs.core_radius)
            throw InvalidArgument("time step violates the CFL-style guard dt*max|u| <= core");
        for (std::size_t p = 0; p < np; ++p) stage[p] = blobs.positions[p] + 0.5 * step * k1[p];
        k2 = velocity(stage, blobs.time + step / 2);
        for (std::size_t p = 0; p < np; ++p) stage[p] = blobs.positions[p] + 0.5 * step * k2[p];
        k3 = velocity(stage, blobs.time + step / 2);
        for (std::size_t p = 0; p < np; ++p) stage[p] = blobs.positions[p] + step * k3[p];
        k4 = velocity(stage, blobs.time + step);
        for (std::size_t p = 0; p < np; ++p)
            blobs.positions[p] += step / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
        blobs.time += step;
        if (lattice) {
            for (const Vec2& p : blobs.positions) {
                if (!in_fluid(*lattice, p))
                    throw BlobEnteredHole("blob at (" + std::to_string(p.x) + ", " +
                                          std::to_string(p.y) + ") entered an inclusion at t = " +
                                          std::to_string(blobs.time));
            }
        }
        if (on_step) on_step(blobs);
    }
    return blobs;
}

// ---------------------------------------------------------------------------
// Stability report

namespace {

double segment_distance(const Rect& box) {
    // Distance from a box to the unit segment [0,1] x {0}.
    const double dx = std::max({0.0, box.lo.x - 1.0, -box.hi.x});
    const double dy = std::max({0.0, box.lo.y, -box.hi.y});
    return std::hypot(dx, dy);
}

// Locally linear reconstruction from scattered samples (k nearest).
double reconstruct(const std::vector<Vec2>& points, const std::vector<double>& values, Vec2 at) {
    const std::size_t k = std::min<std::size_t>(8, points.size());
    std::vector<std::pair<double, std::size_t>> nearest;
    nearest.reserve(points.size());
    for (std::size_t q = 0; q < points.size(); ++q)
        nearest.emplace_back((points[q] - at).norm2(), q);
    std::partial_sort(nearest.begin(), nearest.begin() + long(k), nearest.end());
    // Weighted least squares for v = a + b . (x - at).
    double s0 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, sv = 0, svx = 0, svy = 0;
    const double h2 = nearest[k - 1].first + 1e-30;
    for (std::size_t r = 0; r < k; ++r) {
        const auto [d2, q] = nearest[r];
        const double w = 1.0 / (d2 + 0.05 * h2);
        const Vec2 d = points[q] - at;
        s0 += w;
        sx += w * d.x;
        sy += w * d.y;
        sxx += w * d.x * d.x;
        sxy += w * d.x * d.y;
        syy += w * d.y * d.y;
        sv += w * values[q];
        svx += w * values[q] * d.x;
        svy += w * values[q] * d.y;
    }
    // Solve the 3x3 normal equations by Cramer.
    const double det = s0 * (sxx * syy - sxy * sxy) - sx * (sx * syy - sxy * sy) +
                       sy * (sx * sxy - sxx * sy);
    if (std::abs(det) < 1e-30) return sv / s0;
    const double da = sv * (sxx * syy - sxy * sxy) - sx * (svx * syy - sxy * svy) +
                      sy * (svx * sxy - sxx * svy);
    return da / det;
}

} // namespace

StabilityReport stability_report(const VorticityField& omega0, const PorousLattice& lattice,
                                 const ConformalMap& map, double t_end, double dt,
                                 double seed_spacing, int snapshot_every) {
    if (segment_distance(omega0.support_box) < 0.3)
        throw InvalidArgument(
            "vorticity support is closer than the 0.3 distance guard to the unit segment");
    if (seed_spacing <= 0)
        seed_spacing = std::max(omega0.support_box.width(), omega0.support_box.height()) / 14.0;

    BlobEnsemble seeds = seed_blobs(omega0, seed_spacing);
    const std::size_t np = seeds.positions.size();
    std::vector<double> seed_values(np);
    for (std::size_t p = 0; p < np; ++p) seed_values[p] = omega0.evaluator(seeds.positions[p]);

    StabilityReport report;
    report.t_end = t_end;
    report.per_seed_sup_gap.assign(np, 0.0);

    // Whole-plane flow.
    std::vector<std::vector<Vec2>> plane_snaps{seeds.positions};
    auto plane_velocity = [&](const std::vector<Vec2>& pos, double) {
        std::vector<Vec2> out(pos.size());
        BlobEnsemble tmp;
        tmp.positions = pos;
        tmp.weights = seeds.weights;
        tmp.core_radius = seeds.core_radius;
        parallel_for(pos.size(), thread_count(),
                     [&](std::size_t p) { out[p] = blob_velocity(tmp, pos[p]); });
        return out;
    };
    advect(seeds, plane_velocity, dt, t_end, nullptr,
           [&](const BlobEnsemble& b) { plane_snaps.push_back(b.positions); });

    // Perforated flow.
    ReflectionSolver solver(lattice, map, 64, 128, 1e-6);
    std::vector<std::vector<Vec2>> perf_snaps{plane_snaps.front()};
    auto perf_velocity = [&](const std::vector<Vec2>& pos, double) {
        BlobEnsemble tmp;
        tmp.positions = pos;
        tmp.weights = seeds.weights;
        tmp.core_radius = seeds.core_radius;
        report.reflection_passes_max =
            std::max(report.reflection_passes_max, solver.solve(tmp));
        std::vector<Vec2> out(pos.size());
        parallel_for(pos.size(), thread_count(), [&](std::size_t p) {
            Vec2 u = blob_velocity(tmp, pos[p]);
            for (int j = 0; j < lattice.n_holes(); ++j) u += solver.correction(j, pos[p]);
            out[p] = u;
        });
        return out;
    };
    BlobEnsemble perf = seed_blobs(omega0, seed_spacing);
    try {
        advect(perf, perf_velocity, dt, t_end, &lattice,
               [&](const BlobEnsemble& b) { perf_snaps.push_back(b.positions); });
    } catch (const BlobEnteredHole&) {
        report.support_hit = true;
        report.t_hit = perf.time;
    }
    // Guard collar around the segment: the bootstrap alternative where the
    // support reaches the porous row before t_end.
    for (const auto& snap : perf_snaps) {
        for (const Vec2& p : snap) {
            const double dseg = std::hypot(std::max({0.0, -p.x, p.x - 1.0}), std::abs(p.y));
            if (dseg < 0.15 && !report.support_hit) {
                report.support_hit = true;
                report.t_hit = report.t_end;
            }
        }
    }

    const std::size_t nsnap = std::min(plane_snaps.size(), perf_snaps.size());

    // Trajectory gaps and series.
    for (std::size_t s = 0; s < nsnap; ++s) {
        const double t = std::min(double(s) * dt, t_end);
        double step_max = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
            const double gap = (plane_snaps[s][p] - perf_snaps[s][p]).norm();
            report.per_seed_sup_gap[p] = std::max(report.per_seed_sup_gap[p], gap);
            step_max = std::max(step_max, gap);
            if (snapshot_every > 0 && (s % std::size_t(snapshot_every) == 0 || s + 1 == nsnap))
                report.series.push_back({t, int(p), plane_snaps[s][p], perf_snaps[s][p], gap});
        }
        report.sup_traj_gap = std::max(report.sup_traj_gap, step_max);
    }

    // Vorticity proxy: transported values compared at matched positions via
    // locally linear reconstruction over the plane-flow cloud.
    for (std::size_t s = 0; s < nsnap; s += std::size_t(std::max(1, snapshot_every))) {
        for (std::size_t p = 0; p < np; ++p) {
            const double rec = reconstruct(plane_snaps[s], seed_values, perf_snaps[s][p]);
            report.vorticity_gap = std::max(report.vorticity_gap, std::abs(seed_values[p] - rec));
        }
    }

    // Velocity gap on a probe grid away from both the segment and supp w0.
    std::vector<Vec2> probes;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) probes.push_back({-0.4 + 1.8 * i / 4.0, 0.35 + 1.2 * j / 4.0});
    for (std::size_t s = 0; s < nsnap; s += std::size_t(std::max(1, snapshot_every))) {
        BlobEnsemble plane_b, perf_b;
        plane_b.positions = plane_snaps[s];
        perf_b.positions = perf_snaps[s];
        plane_b.weights = perf_b.weights = seeds.weights;
        plane_b.core_radius = perf_b.core_radius = seeds.core_radius;
        solver.solve(perf_b);
        for (const Vec2& x : probes) {
            Vec2 ue = blob_velocity(perf_b, x);
            for (int j = 0; j < lattice.n_holes(); ++j) ue += solver.correction(j, x);
            const Vec2 u = blob_velocity(plane_b, x);
            report.velocity_gap = std::max(report.velocity_gap, (ue - u).norm());
        }
    }
    return report;
}

} // namespace rowperm
