#include "rowperm/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rowperm/errors.hpp"
#include "rowperm/quadrature.hpp"
#include "rowperm/util.hpp"

namespace rowperm {

namespace detail {

constexpr double kPi = std::numbers::pi;

struct MapImpl {
    virtual ~MapImpl() = default;
    virtual Cpx forward(Cpx x) const = 0;
    virtual Cpx inverse(Cpx w) const = 0;
    virtual Cpx derivative(Cpx x) const = 0;
    virtual std::pair<Cpx, Cpx> forward_and_derivative(Cpx x) const {
        return {forward(x), derivative(x)};
    }
    /// Same, warm-started from a previous nearby image value.
    virtual std::pair<Cpx, Cpx> forward_and_derivative_hinted(Cpx x, Cpx /*hint*/) const {
        return forward_and_derivative(x);
    }
};

struct IdentityImpl final : MapImpl {
    Cpx forward(Cpx x) const override { return x; }
    Cpx inverse(Cpx w) const override { return w; }
    Cpx derivative(Cpx) const override { return {1.0, 0.0}; }
    std::pair<Cpx, Cpx> forward_and_derivative(Cpx x) const override { return {x, {1.0, 0.0}}; }
};

// Exterior map of a polygon. We work with the inverse direction
//   G : {|z| > 1} -> K^c,   G'(z) = c prod_k (1 - z_k / z)^{gamma_k},
// gamma_k = theta_k/pi - 1 in (0,1), prevertices z_k on the unit circle with
// sum gamma_k z_k = 0 (single-valuedness) and sum gamma_k = 2. Principal
// powers are analytic on |z| > 1 because 1 - z_k/z stays inside D(1,1).
// The normalization G'(inf) = c > 0 makes T = G^{-1} satisfy T'(inf) = 1/c.
struct ExteriorScImpl final : MapImpl {
    int n = 0;
    std::vector<double> sigma;  // prevertex angles, increasing, sigma[n-1] in (0, 2pi]
    std::vector<Cpx> prevertex; // e^{i sigma_k}
    std::vector<double> gamma;
    std::vector<Cpx> vertex; // polygon corners, ccw, vertex[k] = G(prevertex[k])
    double scale = 1.0;      // c
    Cpx anchor_value;        // G at prevertex[n-1]

    // Laurent tail of G for |z| >= series_radius:
    //   G(z) = c (z - sum_{m>=2} p_m z^{1-m} / (m-1)) + series_const
    std::vector<Cpx> pcoef; // p_2, p_3, ... (pcoef[0] = p_2)
    Cpx series_const;
    double series_radius = 2.5;

    // cached quadrature rules
    std::vector<GaussRule> arc_rule;          // per arc k: Jacobi(alpha=gamma_{k+1}, beta=gamma_k)
    std::vector<GaussRule> partial_rule;      // per corner k: Jacobi(alpha=0, beta=gamma_k)
    std::vector<GaussRule> partial_rule_right; // per corner k: Jacobi(alpha=gamma_k, beta=0)
    Cpx far_offset;                           // g0 in G(z) ~ c z + g0

    double arc_of(double theta) const; // wraps into [sigma base, +2pi)

    Cpx gprime_reduced(Cpx z, int skip_a, int skip_b) const;
    Cpx gprime(Cpx z) const { return scale * gprime_reduced(z, -1, -1); }

    double arc_span(int k) const; // angular length of arc k
    Cpx integrate_arc(int k, double u0, double u1) const;     // offsets from the arc start
    Cpx integrate_segment(Cpx a, Cpx b, int order) const;     // straight line
    Cpx integrate_ray(double theta, double r) const;          // from e^{i theta} to r e^{i theta}
    Cpx gmap(Cpx z) const;                                    // G(z), |z| >= 1
    Cpx gmap_series(Cpx z) const;

    Cpx inverse(Cpx w) const override { return gmap(w); }
    Cpx forward(Cpx x) const override;
    Cpx derivative(Cpx x) const override {
        const Cpx z = forward(x);
        return 1.0 / gprime(z);
    }
    std::pair<Cpx, Cpx> forward_and_derivative(Cpx x) const override {
        const Cpx z = forward(x);
        return {z, 1.0 / gprime(z)};
    }
    std::pair<Cpx, Cpx> forward_and_derivative_hinted(Cpx x, Cpx hint) const override {
        if (std::abs(hint) >= 1.0) {
            Cpx z;
            if (newton(x, hint, z)) return {z, 1.0 / gprime(z)};
        }
        return forward_and_derivative(x);
    }

    // Newton solve of G(z) = x with a supplied initial guess; returns the
    // solution and whether it converged.
    bool newton(Cpx x, Cpx z0, Cpx& out) const;
    Cpx corner_guess(Cpx x, int k) const;
    int nearest_corner(Cpx x) const;
};

struct RescaledImpl final : MapImpl {
    std::shared_ptr<const MapImpl> base;
    Cpx center;
    double half_eps = 1.0;

    Cpx forward(Cpx x) const override { return base->forward((x - center) / half_eps); }
    Cpx inverse(Cpx w) const override { return half_eps * base->inverse(w) + center; }
    Cpx derivative(Cpx x) const override {
        return base->derivative((x - center) / half_eps) / half_eps;
    }
    std::pair<Cpx, Cpx> forward_and_derivative(Cpx x) const override {
        auto [t, dt] = base->forward_and_derivative((x - center) / half_eps);
        return {t, dt / half_eps};
    }
    std::pair<Cpx, Cpx> forward_and_derivative_hinted(Cpx x, Cpx hint) const override {
        auto [t, dt] = base->forward_and_derivative_hinted((x - center) / half_eps, hint);
        return {t, dt / half_eps};
    }
};

Cpx ExteriorScImpl::gprime_reduced(Cpx z, int skip_a, int skip_b) const {
    Cpx prod{1.0, 0.0};
    for (int k = 0; k < n; ++k) {
        if (k == skip_a || k == skip_b) continue;
        prod *= std::pow(Cpx{1.0, 0.0} - prevertex[std::size_t(k)] / z, gamma[std::size_t(k)]);
    }
    return prod;
}

double ExteriorScImpl::arc_span(int k) const {
    const int k1 = (k + 1) % n;
    return std::fmod(sigma[std::size_t(k1)] - sigma[std::size_t(k)] + 4 * kPi, 2 * kPi);
}

// Integral of G'/c over the sub-arc of arc k (between prevertices k and
// k+1 mod n) given by start offsets u0 < u1 in [0, span]. Endpoint zeros of
// order gamma are absorbed into Gauss-Jacobi weights.
Cpx ExteriorScImpl::integrate_arc(int k, double u0, double u1) const {
    if (u1 <= u0) return {0.0, 0.0};
    const int k1 = (k + 1) % n;
    const double span = arc_span(k);
    // An endpoint close to (but not at) a prevertex leaves a near-zero of
    // order gamma inside a plain panel; route around it via the full arc
    // minus the singular tail.
    if (u1 < span - 1e-14 && u1 > 0.9 * span)
        return integrate_arc(k, u0, span) - integrate_arc(k, u1, span);
    if (u0 > 1e-14 && u0 < 0.1 * span)
        return integrate_arc(k, 0.0, u1) - integrate_arc(k, 0.0, u0);
    const double sk = sigma[std::size_t(k)];
    const double sk1 = sk + span;
    const double from = sk + u0;
    const double to = sk + u1;
    const bool left_sing = u0 <= 1e-14;
    const bool right_sing = u1 >= span - 1e-14;

    const GaussRule* rule;
    double alpha = 0.0, beta = 0.0;
    if (left_sing && right_sing) {
        rule = &arc_rule[std::size_t(k)];
        alpha = gamma[std::size_t(k1)];
        beta = gamma[std::size_t(k)];
    } else if (left_sing) {
        rule = &partial_rule[std::size_t(k)];
        beta = gamma[std::size_t(k)];
    } else if (right_sing) {
        rule = &partial_rule_right[std::size_t(k1)];
        alpha = gamma[std::size_t(k1)];
    } else {
        rule = &gauss_legendre(24);
    }

    const double mid = 0.5 * (from + to), half = 0.5 * (to - from);
    Cpx sum{0.0, 0.0};
    for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
        const double t = rule->nodes[i];
        const double s = mid + half * t;
        const Cpx zeta = std::polar(1.0, s);
        Cpx val = gprime_reduced(zeta, left_sing ? k : -1, right_sing ? k1 : -1);
        if (left_sing) {
            const Cpx ratio = (Cpx{1.0, 0.0} - prevertex[std::size_t(k)] / zeta) / (s - sk);
            val *= std::pow(ratio, gamma[std::size_t(k)]);
        }
        if (right_sing) {
            const Cpx ratio = (Cpx{1.0, 0.0} - prevertex[std::size_t(k1)] / zeta) / (sk1 - s);
            val *= std::pow(ratio, gamma[std::size_t(k1)]);
        }
        val *= Cpx{0.0, 1.0} * zeta; // d zeta = i e^{i s} ds
        sum += rule->weights[i] * val;
    }
    // Undo the affine map inside the absorbed weights.
    double jac = half;
    if (left_sing) jac *= std::pow(half, beta);
    if (right_sing) jac *= std::pow(half, alpha);
    return sum * jac;
}

Cpx ExteriorScImpl::integrate_segment(Cpx a, Cpx b, int order) const {
    const GaussRule& g = gauss_legendre(order);
    const Cpx mid = 0.5 * (a + b), half = 0.5 * (b - a);
    Cpx sum{0.0, 0.0};
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        sum += g.weights[i] * gprime_reduced(mid + g.nodes[i] * half, -1, -1);
    return sum * half;
}

Cpx ExteriorScImpl::integrate_ray(double theta, double r) const {
    // Along zeta = rho e^{i theta}, rho in [1, r]. The integrand varies on
    // the scale of the angular gap to the nearest prevertex (and has a
    // Hoelder endpoint when the gap vanishes), so panels are graded toward
    // rho = 1 with a matching finest width.
    double min_gap = 1e30;
    for (int k = 0; k < n; ++k) {
        double d = std::abs(std::remainder(theta - sigma[std::size_t(k)], 2 * kPi));
        min_gap = std::min(min_gap, d);
    }
    const double finest = std::clamp(min_gap * 0.25, 1e-9, 0.25);
    const auto brk = graded_breakpoints(1.0, r, finest, 64);
    const Cpx dir = std::polar(1.0, theta);
    Cpx sum{0.0, 0.0};
    for (std::size_t p = 0; p + 1 < brk.size(); ++p)
        sum += integrate_segment(brk[p] * dir, brk[p + 1] * dir, 12);
    return sum;
}

Cpx ExteriorScImpl::gmap_series(Cpx z) const {
    const Cpx inv = 1.0 / z;
    Cpx tail{0.0, 0.0};
    Cpx zpow = Cpx{1.0, 0.0}; // z^{1-m} accumulates starting at m=2 -> z^{-1}
    for (std::size_t m = 0; m < pcoef.size(); ++m) {
        zpow *= inv;
        tail += pcoef[m] * zpow / double(m + 1); // p_{m+2} z^{-(m+1)} / (m+1)
    }
    return scale * (z - tail) + series_const;
}

Cpx ExteriorScImpl::gmap(Cpx z) const {
    if (std::abs(z) >= series_radius) return gmap_series(z);
    // Path: anchor prevertex (last) -> ccw along the circle to arg z -> radial.
    const double base = sigma[std::size_t(n - 1)];
    double sweep = std::fmod(std::arg(z) - base, 2 * kPi);
    if (sweep < 0) sweep += 2 * kPi;
    const double theta = base + sweep;

    Cpx acc = anchor_value;
    double remaining = sweep;
    int k = n - 1;
    while (remaining > 1e-15) {
        const double span = arc_span(k);
        const double u1 = std::min(span, remaining);
        acc += scale * integrate_arc(k, 0.0, u1);
        remaining -= u1;
        k = (k + 1) % n;
    }
    const double r = std::abs(z);
    if (r > 1.0 + 1e-15) acc += scale * integrate_ray(theta, r);
    return acc;
}

int ExteriorScImpl::nearest_corner(Cpx x) const {
    int best = 0;
    double bd = 1e300;
    for (int k = 0; k < n; ++k) {
        const double d = std::abs(x - vertex[std::size_t(k)]);
        if (d < bd) {
            bd = d;
            best = k;
        }
    }
    return best;
}

// Local wedge model near corner k:
//   G(z) ~= w_k + Q_k (z - z_k)^{1 + gamma_k} / (1 + gamma_k),
// where Q_k = c z_k^{-gamma_k} prod_{j != k} (1 - z_j/z_k)^{gamma_j}.
Cpx ExteriorScImpl::corner_guess(Cpx x, int k) const {
    const Cpx zk = prevertex[std::size_t(k)];
    const double g = gamma[std::size_t(k)];
    Cpx qk = scale * std::pow(zk, -g);
    for (int j = 0; j < n; ++j) {
        if (j == k) continue;
        qk *= std::pow(Cpx{1.0, 0.0} - prevertex[std::size_t(j)] / zk, gamma[std::size_t(j)]);
    }
    const Cpx target = (x - vertex[std::size_t(k)]) * (1.0 + g) / qk;
    const double mag = std::pow(std::abs(target), 1.0 / (1.0 + g));
    const double base_arg = std::arg(target) / (1.0 + g);
    const double zk_arg = std::arg(zk);
    // Pick the branch whose direction is closest to the outward radial one.
    double best_arg = base_arg;
    double best_diff = 1e300;
    for (int m = -2; m <= 2; ++m) {
        const double a = (std::arg(target) + 2 * kPi * m) / (1.0 + g);
        const double diff = std::abs(std::remainder(a - zk_arg, 2 * kPi));
        if (diff < best_diff) {
            best_diff = diff;
            best_arg = a;
        }
    }
    Cpx z = zk + std::polar(mag, best_arg);
    if (std::abs(z) < 1.0) z *= (1.0 + 1e-14) / std::abs(z);
    return z;
}

bool ExteriorScImpl::newton(Cpx x, Cpx z0, Cpx& out) const {
    Cpx z = z0;
    if (std::abs(z) < 1.0) z /= std::abs(z) * std::abs(z); // reflect inside guesses
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    Cpx gz = gmap(z);
    for (int it = 0; it < 60; ++it) {
        const Cpx res = gz - x;
        if (std::abs(res) <= tol) {
            out = z;
            return true;
        }
        const Cpx dg = gprime(z);
        if (std::abs(dg) < 1e-300) return false;
        Cpx step = -res / dg;
        // Damped update with an exterior safeguard.
        for (int half = 0; half < 30; ++half) {
            Cpx zn = z + step;
            const double rn = std::abs(zn);
            if (rn < 1.0) zn *= (2.0 - rn) / rn;
            // Evaluate incrementally along the segment when that is provably
            // accurate: the segment must stay exterior and keep a distance of
            // at least 4 segment lengths from every prevertex.
            Cpx gz_new;
            const Cpx seg = zn - z;
            const double seg_len = std::abs(seg);
            const double t = std::clamp(-std::real(std::conj(seg) * z) / std::norm(seg), 0.0, 1.0);
            const double closest = std::abs(z + t * seg);
            bool use_increment = closest >= 1.0 - 1e-13 && seg_len < 0.5 * std::abs(z);
            if (use_increment) {
                for (int k = 0; k < n && use_increment; ++k) {
                    const Cpx zk = prevertex[std::size_t(k)];
                    const double tk =
                        std::clamp(std::real(std::conj(seg) * (zk - z)) / std::norm(seg), 0.0, 1.0);
                    if (std::abs(z + tk * seg - zk) < 4.0 * seg_len) use_increment = false;
                }
            }
            if (use_increment)
                gz_new = gz + scale * integrate_segment(z, zn, 16);
            else
                gz_new = gmap(zn);
            if (std::abs(gz_new - x) < std::abs(res) || half == 29) {
                z = zn;
                gz = gz_new;
                break;
            }
            step *= 0.5;
        }
    }
    out = z;
    return std::abs(gz - x) <= 1e-9 * std::max(1.0, std::abs(x));
}

Cpx ExteriorScImpl::forward(Cpx x) const {
    // Reject strictly interior targets before the inversion machinery runs;
    // boundary points are legitimate (the map extends continuously).
    {
        bool inside = false;
        const Vec2 p = to_vec(x);
        for (std::size_t a = 0, b = vertex.size() - 1; a < vertex.size(); b = a++) {
            const Vec2 va = to_vec(vertex[a]), vb = to_vec(vertex[b]);
            if ((va.y > p.y) != (vb.y > p.y)) {
                const double xi = vb.x + (p.y - vb.y) / (va.y - vb.y) * (va.x - vb.x);
                if (p.x < xi) inside = !inside;
            }
        }
        if (inside) {
            double bdist = 1e300;
            for (std::size_t a = 0, b = vertex.size() - 1; a < vertex.size(); b = a++) {
                const Cpx e = vertex[a] - vertex[b];
                const double t = std::clamp(
                    std::real(std::conj(e) * (x - vertex[b])) / std::norm(e), 0.0, 1.0);
                bdist = std::min(bdist, std::abs(vertex[b] + t * e - x));
            }
            if (bdist > 1e-9)
                throw InvalidArgument("conformal forward at a point inside the obstacle");
        }
    }
    // Far guess from G(z) ~ c z + g0.
    Cpx z;
    const Cpx far_guess = (x - far_offset) / scale;
    if (std::abs(far_guess) > 1.2) {
        if (newton(x, far_guess, z)) return z;
    }
    const int k = nearest_corner(x);
    const double corner_dist = std::abs(x - vertex[std::size_t(k)]);
    if (corner_dist < 0.5) {
        if (newton(x, corner_guess(x, k), z)) return z;
    }
    // Continuation along the outward ray, warm-starting each step. The ray
    // passes through x itself, so the last accepted step is the answer.
    const Cpx dir = std::abs(x) > 1e-12 ? x / std::abs(x) : Cpx{1.0, 0.0};
    const double target = std::abs(x);
    const double far = std::max(4.0, 2.0 * target);
    Cpx zgood;
    if (!newton(far * dir, (far * dir - far_offset) / scale, zgood))
        throw ParameterProblemDiverged("inverse-map continuation failed at the far seed");
    double s = far;
    int guard = 0;
    while (s > target) {
        double ds = std::max(0.3 * (s - target), 1e-6);
        bool ok = false;
        for (int half = 0; half < 24 && !ok; ++half) {
            const double snext = (s - ds <= target + 1e-15) ? target : s - ds;
            Cpx ztry;
            if (newton(snext * dir, zgood, ztry)) {
                zgood = ztry;
                s = snext;
                ok = true;
            } else {
                ds *= 0.5;
            }
        }
        if (!ok || ++guard > 300)
            throw ParameterProblemDiverged("inverse-map continuation stalled");
    }
    return zgood;
}

} // namespace detail

using detail::ExteriorScImpl;
using detail::kPi;

namespace {

// Side lengths of the unrotated image polygon, computed with c = 1.
// The image of each arc is a straight side, so the modulus integral
// equals the side length.
std::vector<double> arc_lengths(const std::vector<double>& sigma, const std::vector<double>& gamma) {
    const int n = int(sigma.size());
    std::vector<double> len(std::size_t(n), 0.0);
    for (int k = 0; k < n; ++k) {
        const int k1 = (k + 1) % n;
        const double a = sigma[std::size_t(k)];
        const double b = a + std::fmod(sigma[std::size_t(k1)] - a + 4 * kPi, 2 * kPi);
        const GaussRule rule = gauss_jacobi(24, gamma[std::size_t(k1)], gamma[std::size_t(k)]);
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double s = mid + half * rule.nodes[i];
            double prod = 1.0;
            for (int j = 0; j < n; ++j) {
                double f;
                if (j == k)
                    f = std::abs(2.0 * std::sin((s - a) / 2)) / (s - a);
                else if (j == k1)
                    f = std::abs(2.0 * std::sin((b - s) / 2)) / (b - s);
                else
                    f = std::abs(2.0 * std::sin((s - sigma[std::size_t(j)]) / 2));
                prod *= std::pow(f, gamma[std::size_t(j)]);
            }
            sum += rule.weights[i] * prod;
        }
        len[std::size_t(k)] =
            sum * half * std::pow(half, gamma[std::size_t(k)] + gamma[std::size_t(k1)]);
    }
    return len;
}

std::vector<double> sc_residual(const std::vector<double>& sig_free,
                                const std::vector<double>& gamma,
                                const std::vector<double>& target_ratio) {
    const int n = int(gamma.size());
    std::vector<double> sigma(sig_free);
    sigma.push_back(2 * kPi);
    std::vector<double> res;
    double re = 0.0, im = 0.0;
    for (int k = 0; k < n; ++k) {
        re += gamma[std::size_t(k)] * std::cos(sigma[std::size_t(k)]);
        im += gamma[std::size_t(k)] * std::sin(sigma[std::size_t(k)]);
    }
    res.push_back(re);
    res.push_back(im);
    if (n > 3) {
        const auto len = arc_lengths(sigma, gamma);
        for (int j = 0; j < n - 3; ++j)
            res.push_back(len[std::size_t(j)] / len[std::size_t(n - 1)] - target_ratio[std::size_t(j)]);
    }
    return res;
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

ConformalMap map_for_shape(const ObstacleShape& shape) {
    if (shape.kind() == ObstacleShape::Kind::Disk) {
        auto impl = std::make_shared<detail::IdentityImpl>();
        return ConformalMap(ConformalMap::Kind::Identity, impl, 1.0, 0.0, 1e300);
    }
    if (shape.kind() == ObstacleShape::Kind::Custom)
        throw UnsupportedShape("custom shapes have no constructive exterior map yet");

    const auto& corners = shape.corners();
    const int n = int(corners.size());
    if (n < 3) throw DegenerateBoundary("polygon map needs at least 3 corners");
    std::vector<double> gamma(std::size_t(n), 0.0);
    std::vector<Cpx> vertex(std::size_t(n), Cpx{});
    double gamma_sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double theta = corners[std::size_t(k)].angle;
        if (!(theta > kPi && theta < 2 * kPi))
            throw DegenerateBoundary("corner angle outside (pi, 2pi)");
        gamma[std::size_t(k)] = theta / kPi - 1.0;
        gamma_sum += gamma[std::size_t(k)];
        vertex[std::size_t(k)] = to_cpx(corners[std::size_t(k)].point);
    }
    if (std::abs(gamma_sum - 2.0) > 1e-9)
        throw DegenerateBoundary("fluid angles do not close up to a simple polygon");

    // Prevertex angles proportional to boundary arclength as initial guess.
    std::vector<double> sig(std::size_t(n), 0.0);
    {
        const double total = shape.perimeter();
        const double s0 = corners[0].param;
        for (int k = 0; k < n; ++k) {
            double along = corners[std::size_t(k)].param - s0;
            if (along < 0) along += total;
            sig[std::size_t(k)] = 2 * kPi * along / total;
        }
        const double shift = 2 * kPi - sig[std::size_t(n - 1)];
        for (double& s : sig) s += shift; // pin the last prevertex at angle 2pi
    }

    std::vector<double> target_ratio;
    for (int j = 0; j + 3 < n; ++j) {
        const double lj = std::abs(vertex[std::size_t(j + 1)] - vertex[std::size_t(j)]);
        const double ln_ = std::abs(vertex[0] - vertex[std::size_t(n - 1)]);
        target_ratio.push_back(lj / ln_);
    }

    // Damped Newton with a finite-difference Jacobian on the n-1 free angles.
    std::vector<double> free(sig.begin(), sig.end() - 1);
    auto residual = [&](const std::vector<double>& f) { return sc_residual(f, gamma, target_ratio); };
    std::vector<double> res = residual(free);
    double rnorm = norm2(res);
    const int m = int(free.size());
    for (int iter = 0; iter < 120 && rnorm > 1e-12; ++iter) {
        // Jacobian.
        std::vector<std::vector<double>> J(std::size_t(m), std::vector<double>(std::size_t(m), 0.0));
        for (int c = 0; c < m; ++c) {
            const double h = 1e-7;
            std::vector<double> fp = free;
            fp[std::size_t(c)] += h;
            const auto rp = residual(fp);
            for (int r = 0; r < m; ++r)
                J[std::size_t(r)][std::size_t(c)] = (rp[std::size_t(r)] - res[std::size_t(r)]) / h;
        }
        // Solve J step = -res by Gaussian elimination with partial pivoting.
        std::vector<double> rhs(res);
        for (double& v : rhs) v = -v;
        for (int c = 0; c < m; ++c) {
            int piv = c;
            for (int r = c + 1; r < m; ++r)
                if (std::abs(J[std::size_t(r)][std::size_t(c)]) > std::abs(J[std::size_t(piv)][std::size_t(c)]))
                    piv = r;
            std::swap(J[std::size_t(c)], J[std::size_t(piv)]);
            std::swap(rhs[std::size_t(c)], rhs[std::size_t(piv)]);
            const double d = J[std::size_t(c)][std::size_t(c)];
            if (std::abs(d) < 1e-300) throw ParameterProblemDiverged("singular prevertex Jacobian");
            for (int r = c + 1; r < m; ++r) {
                const double f = J[std::size_t(r)][std::size_t(c)] / d;
                for (int cc = c; cc < m; ++cc)
                    J[std::size_t(r)][std::size_t(cc)] -= f * J[std::size_t(c)][std::size_t(cc)];
                rhs[std::size_t(r)] -= f * rhs[std::size_t(c)];
            }
        }
        std::vector<double> step(std::size_t(m), 0.0);
        for (int r = m - 1; r >= 0; --r) {
            double v = rhs[std::size_t(r)];
            for (int c = r + 1; c < m; ++c)
                v -= J[std::size_t(r)][std::size_t(c)] * step[std::size_t(c)];
            step[std::size_t(r)] = v / J[std::size_t(r)][std::size_t(r)];
        }
        double damp = 1.0;
        for (int half = 0; half < 40; ++half) {
            std::vector<double> trial(std::size_t(m), 0.0);
            bool ordered = true;
            double prev = 0.0;
            for (int i = 0; i < m; ++i) {
                trial[std::size_t(i)] = free[std::size_t(i)] + damp * step[std::size_t(i)];
                if (trial[std::size_t(i)] <= prev + 1e-9 || trial[std::size_t(i)] >= 2 * kPi - 1e-9)
                    ordered = false;
                prev = trial[std::size_t(i)];
            }
            if (ordered) {
                const auto rt = residual(trial);
                const double rn = norm2(rt);
                if (rn < rnorm) {
                    free = trial;
                    res = rt;
                    rnorm = rn;
                    break;
                }
            }
            damp *= 0.5;
            if (half == 39) throw ParameterProblemDiverged("prevertex line search stalled");
        }
    }
    if (rnorm > 1e-10)
        throw ParameterProblemDiverged("prevertex residual " + std::to_string(rnorm) +
                                       " above 1e-10");

    auto impl = std::make_shared<ExteriorScImpl>();
    impl->n = n;
    impl->gamma = gamma;
    impl->vertex = vertex;
    impl->sigma.assign(free.begin(), free.end());
    impl->sigma.push_back(2 * kPi);
    impl->prevertex.resize(std::size_t(n));
    for (int k = 0; k < n; ++k) impl->prevertex[std::size_t(k)] = std::polar(1.0, impl->sigma[std::size_t(k)]);
    impl->arc_rule.clear();
    impl->partial_rule.clear();
    for (int k = 0; k < n; ++k) {
        const int k1 = (k + 1) % n;
        impl->arc_rule.push_back(gauss_jacobi(24, gamma[std::size_t(k1)], gamma[std::size_t(k)]));
        impl->partial_rule.push_back(gauss_jacobi(24, 0.0, gamma[std::size_t(k)]));
        impl->partial_rule_right.push_back(gauss_jacobi(24, gamma[std::size_t(k)], 0.0));
    }
    impl->scale = 1.0;
    impl->anchor_value = {0.0, 0.0};

    // Unrotated vertex images, then the complex similarity w = A + C what.
    std::vector<Cpx> what(std::size_t(n), Cpx{});
    what[std::size_t(n - 1)] = {0.0, 0.0};
    for (int k = 0; k < n - 1; ++k) {
        const int src = (n - 1 + k) % n;
        what[std::size_t((src + 1) % n)] =
            what[std::size_t(src)] + impl->integrate_arc(src, 0.0, impl->arc_span(src));
    }
    Cpx mean_w{0, 0}, mean_h{0, 0};
    for (int k = 0; k < n; ++k) {
        mean_w += vertex[std::size_t(k)];
        mean_h += what[std::size_t(k)];
    }
    mean_w /= double(n);
    mean_h /= double(n);
    Cpx num{0, 0};
    double den = 0.0;
    for (int k = 0; k < n; ++k) {
        const Cpx dh = what[std::size_t(k)] - mean_h;
        num += (vertex[std::size_t(k)] - mean_w) * std::conj(dh);
        den += std::norm(dh);
    }
    const Cpx C = num / den;
    const Cpx A = mean_w - C * mean_h;
    double worst = 0.0;
    for (int k = 0; k < n; ++k)
        worst = std::max(worst, std::abs(A + C * what[std::size_t(k)] - vertex[std::size_t(k)]));
    if (worst > 1e-8)
        throw ParameterProblemDiverged("vertex image mismatch " + std::to_string(worst));

    // Rotate prevertices so that G'(inf) is real positive.
    const double psi = std::arg(C);
    for (int k = 0; k < n; ++k) {
        impl->sigma[std::size_t(k)] += psi;
        impl->prevertex[std::size_t(k)] = std::polar(1.0, impl->sigma[std::size_t(k)]);
    }
    impl->scale = std::abs(C);
    impl->anchor_value = A; // G at the (rotated) anchor prevertex

    // Laurent coefficients p_m of prod (1 - z_k/z)^gamma via exp of the
    // log series; s_1 = 0 holds by the residue condition.
    {
        const int M = 48;
        std::vector<Cpx> logc(std::size_t(M) + 1, Cpx{0, 0}); // coefficient of z^{-m}
        for (int m = 1; m <= M; ++m) {
            Cpx sm{0, 0};
            for (int k = 0; k < n; ++k)
                sm += gamma[std::size_t(k)] * std::pow(impl->prevertex[std::size_t(k)], m);
            logc[std::size_t(m)] = -sm / double(m);
        }
        std::vector<Cpx> p(std::size_t(M) + 1, Cpx{0, 0});
        p[0] = {1.0, 0.0};
        for (int m = 1; m <= M; ++m) { // p_m = (1/m) sum_{j=1}^{m} j logc_j p_{m-j}
            Cpx acc{0, 0};
            for (int j = 1; j <= m; ++j)
                acc += double(j) * logc[std::size_t(j)] * p[std::size_t(m - j)];
            p[std::size_t(m)] = acc / double(m);
        }
        impl->pcoef.assign(p.begin() + 2, p.end());
        impl->series_const = {0.0, 0.0};
        impl->series_radius = 2.5;
        // Match the series constant against the path integral once.
        const Cpx zref{3.0, 0.4};
        const Cpx via_path = impl->gmap(zref);
        impl->series_const = via_path - impl->gmap_series(zref);
    }
    impl->far_offset = impl->gmap_series(Cpx{800.0, 0.0}) - impl->scale * 800.0;

    const double beta = 1.0 / impl->scale;

    // Remainder bound: h = T - beta x is holomorphic through infinity, so its
    // modulus over |x| >= 5 peaks on |x| = 5.
    double rem = 0.0;
    for (int i = 0; i < 256; ++i) {
        const Cpx x = std::polar(5.0, 2 * kPi * i / 256.0);
        Cpx z;
        if (!impl->newton(x, (x - impl->far_offset) / impl->scale, z)) continue;
        rem = std::max(rem, std::abs(z - beta * x));
    }
    rem *= 1.05;

    double d0 = 1e300;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            d0 = std::min(d0, std::abs(vertex[std::size_t(i)] - vertex[std::size_t(j)]));
            d0 = std::min(d0, std::abs(impl->prevertex[std::size_t(i)] - impl->prevertex[std::size_t(j)]));
        }
    }
    d0 /= 6.0;

    return ConformalMap(ConformalMap::Kind::ExteriorSC, impl, beta, rem, d0);
}

Cpx ConformalMap::forward(Cpx x) const { return impl_->forward(x); }
std::pair<Cpx, Cpx> ConformalMap::forward_and_derivative(Cpx x) const {
    return impl_->forward_and_derivative(x);
}
std::pair<Cpx, Cpx> ConformalMap::forward_and_derivative_hinted(Cpx x, Cpx hint) const {
    return impl_->forward_and_derivative_hinted(x, hint);
}
Cpx ConformalMap::inverse(Cpx w) const { return impl_->inverse(w); }
Cpx ConformalMap::derivative(Cpx x) const { return impl_->derivative(x); }

Cpx conjugate_point(Cpx y) {
    const double n2 = std::norm(y);
    if (n2 == 0.0) throw OriginConjugate("conjugate point of the origin is undefined");
    return y / n2;
}

Vec2 conjugate_point(Vec2 y) { return to_vec(conjugate_point(to_cpx(y))); }

CornerAsymptotics probe_corner_exponent(const ConformalMap& map, const ObstacleShape& shape,
                                        int corner_index) {
    const auto& corners = shape.corners();
    if (corners.empty()) throw InvalidArgument("shape declares no corners");
    if (corner_index < 0 || corner_index >= int(corners.size()))
        throw InvalidArgument("corner index out of range");
    const Corner& c = corners[std::size_t(corner_index)];

    const Vec2 t_in = shape.tangent_before(c.param);
    const Vec2 t_out = shape.tangent_after(c.param);
    Vec2 solid = t_out - t_in; // r1 + r2 with r1 = -t_in, r2 = t_out
    const double sn = solid.norm();
    if (sn < 1e-12) throw DegenerateBoundary("flat corner has no bisector");
    const Vec2 bis = -1.0 / sn * solid;

    CornerAsymptotics out;
    out.corner_index = corner_index;
    out.predicted_exponent = kPi / c.angle - 1.0;
    out.holder_mu = 1.0;
    for (const Corner& ck : corners) out.holder_mu = std::min(out.holder_mu, kPi / ck.angle);

    const int npts = 25;
    std::vector<double> lr, ld;
    for (int i = 0; i < npts; ++i) {
        const double r = 1e-4 * std::pow(100.0, double(i) / (npts - 1));
        const Vec2 x = c.point + r * bis;
        if (shape.contains(x)) throw RayExitsDomain("bisector ray enters the obstacle");
        const Cpx dT = map.derivative(to_cpx(x));
        lr.push_back(std::log(r));
        ld.push_back(std::log(std::abs(dT)));
    }
    out.fitted_exponent = fit_line(lr, ld).slope;
    return out;
}

HolderProbe probe_holder(const ConformalMap& map, const ObstacleShape& shape, int n_pairs) {
    if (n_pairs < 1000) throw InvalidArgument("probe_holder needs at least 1e3 pairs");
    double mu = 1.0;
    for (const Corner& c : shape.corners()) mu = std::min(mu, kPi / c.angle);

    Rng rng(0x5eed5eed1234ull);
    auto sample = [&]() {
        for (;;) {
            const Vec2 p{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
            if (!shape.contains(p)) return p;
        }
    };
    HolderProbe probe;
    probe.m_hat = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
        const Vec2 x = sample(), y = sample();
        const double d = dist(x, y);
        if (d < 1e-12) continue;
        const double img = std::abs(map.forward(to_cpx(x)) - map.forward(to_cpx(y)));
        probe.m_hat = std::max(probe.m_hat, img / std::max(std::pow(d, mu), d));
    }

    // Worst-case exponent from corner-straddling pairs at log-spaced
    // separations; the regression intercept absorbs the constant.
    probe.mu_hat = 1.0;
    if (shape.corners().empty()) {
        std::vector<double> lx, ly;
        for (int i = 0; i < 40; ++i) {
            const Vec2 x = sample();
            const double r = 1e-4 * std::pow(10.0, 2.0 * i / 39.0);
            const Vec2 y = x + Vec2{r, 0};
            if (shape.contains(y)) continue;
            lx.push_back(std::log(r));
            ly.push_back(std::log(std::abs(map.forward(to_cpx(x)) - map.forward(to_cpx(y)))));
        }
        probe.mu_hat = fit_line(lx, ly).slope;
        return probe;
    }
    for (std::size_t k = 0; k < shape.corners().size(); ++k) {
        const Corner& c = shape.corners()[k];
        const Vec2 t_in = shape.tangent_before(c.param);
        const Vec2 t_out = shape.tangent_after(c.param);
        Vec2 solid = t_out - t_in;
        const Vec2 bis = -1.0 / solid.norm() * solid;
        std::vector<double> lx, ly;
        for (int i = 0; i < 30; ++i) {
            const double r = 1e-5 * std::pow(10.0, 3.0 * i / 29.0);
            const Vec2 x = c.point + r * bis;
            const Vec2 y = c.point + 2.0 * r * bis;
            if (shape.contains(x) || shape.contains(y)) continue;
            lx.push_back(std::log(r));
            ly.push_back(std::log(std::abs(map.forward(to_cpx(x)) - map.forward(to_cpx(y)))));
        }
        if (lx.size() >= 5) probe.mu_hat = std::min(probe.mu_hat, fit_line(lx, ly).slope);
    }
    return probe;
}

ConformalMap rescaled_map(const ConformalMap& map, Vec2 center, double epsilon) {
    if (epsilon <= 0) throw NonPositiveScale("rescaled_map needs epsilon > 0");
    auto impl = std::make_shared<detail::RescaledImpl>();
    impl->base = map.impl();
    impl->center = to_cpx(center);
    impl->half_eps = epsilon / 2;
    return ConformalMap(ConformalMap::Kind::Rescaled, impl, map.beta(), map.remainder_bound(),
                        map.delta0());
}

} // namespace rowperm
