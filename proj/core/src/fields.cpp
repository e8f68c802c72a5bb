#include "rowperm/fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rowperm/errors.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/util.hpp"

namespace rowperm {

namespace {

constexpr double kPi = std::numbers::pi;

// Smoothstep rising 0 -> 1 on [0, 1].
double ramp_up(double s) { return 1.0 - smoothstep_down(s); }

void fill_caches(VorticityField& f, double abs_tol) {
    QuadratureSpec spec;
    spec.abs_tol = abs_tol;
    spec.max_subdivisions = 14;
    f.total_mass = integrate_region([&](Vec2 p) { return f.evaluator(p); },
                                    std::span<const Rect>(&f.support_box, 1), nullptr, spec);
    f.l1_norm = integrate_region([&](Vec2 p) { return std::abs(f.evaluator(p)); },
                                 std::span<const Rect>(&f.support_box, 1), nullptr, spec);
    f.linf_norm = sup_norm_region([&](Vec2 p) { return std::abs(f.evaluator(p)); },
                                  std::span<const Rect>(&f.support_box, 1), spec);
    const double h = 1e-6;
    f.grad_linf_norm = sup_norm_region(
        [&, h](Vec2 p) {
            const double gx = (f.evaluator({p.x + h, p.y}) - f.evaluator({p.x - h, p.y})) / (2 * h);
            const double gy = (f.evaluator({p.x, p.y + h}) - f.evaluator({p.x, p.y - h})) / (2 * h);
            return std::hypot(gx, gy);
        },
        std::span<const Rect>(&f.support_box, 1), spec);
}

} // namespace

VorticityField bump_field(Vec2 center, double radius) {
    if (radius <= 0) throw InvalidArgument("bump radius must be positive");
    VorticityField f;
    const double r2 = radius * radius;
    const double amp = 3.0 / (kPi * r2); // unit total mass
    f.evaluator = [center, r2, amp](Vec2 p) {
        const double d2 = (p - center).norm2();
        if (d2 >= r2) return 0.0;
        const double t = 1.0 - d2 / r2;
        return amp * t * t;
    };
    f.support_box = {{center.x - radius, center.y - radius}, {center.x + radius, center.y + radius}};
    f.spec = "bump:" + format_double(center.x) + "," + format_double(center.y) + "," +
             format_double(radius);
    f.radial_pieces.push_back({center, radius, {radius}});
    fill_caches(f, 1e-10);
    return f;
}

VorticityField mollified_disk_field(Vec2 center, double radius) {
    if (radius <= 0) throw InvalidArgument("disk radius must be positive");
    VorticityField f;
    const double h = 1e-3; // fixed mollification scale
    f.evaluator = [center, radius, h](Vec2 p) {
        const double d = (p - center).norm();
        if (d >= radius) return 0.0;
        if (d <= radius - h) return 1.0;
        return ramp_up((radius - d) / h);
    };
    f.support_box = {{center.x - radius, center.y - radius}, {center.x + radius, center.y + radius}};
    f.spec = "mollified-disk:" + format_double(center.x) + "," + format_double(center.y) + "," +
             format_double(radius);
    f.radial_pieces.push_back({center, radius, {radius - h, radius}});
    fill_caches(f, 1e-8);
    return f;
}

VorticityField dipole_field(Vec2 center_plus, Vec2 center_minus, double radius) {
    VorticityField plus = bump_field(center_plus, radius);
    VorticityField minus = bump_field(center_minus, radius);
    VorticityField f;
    f.evaluator = [p = plus.evaluator, m = minus.evaluator](Vec2 x) { return p(x) - m(x); };
    f.support_box = {{std::min(plus.support_box.lo.x, minus.support_box.lo.x),
                      std::min(plus.support_box.lo.y, minus.support_box.lo.y)},
                     {std::max(plus.support_box.hi.x, minus.support_box.hi.x),
                      std::max(plus.support_box.hi.y, minus.support_box.hi.y)}};
    f.spec = "dipole:" + format_double(center_plus.x) + "," + format_double(center_plus.y) + "," +
             format_double(center_minus.x) + "," + format_double(center_minus.y) + "," +
             format_double(radius);
    f.radial_pieces = plus.radial_pieces;
    f.radial_pieces.insert(f.radial_pieces.end(), minus.radial_pieces.begin(),
                           minus.radial_pieces.end());
    fill_caches(f, 1e-10);
    return f;
}

VorticityField field_by_name(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::stringstream ss(spec.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) args.push_back(std::stod(tok));
    }
    if (kind == "bump" && args.size() == 3) return bump_field({args[0], args[1]}, args[2]);
    if (kind == "mollified-disk" && args.size() == 3)
        return mollified_disk_field({args[0], args[1]}, args[2]);
    if (kind == "dipole" && args.size() == 5)
        return dipole_field({args[0], args[1]}, {args[2], args[3]}, args[4]);
    throw InvalidArgument("unknown field spec: " + spec);
}

SourceGrid SourceGrid::build(const VorticityField& f, int panels_per_side, int order) {
    const GaussRule& g = gauss_legendre(order);
    SourceGrid grid;
    const Rect& box = f.support_box;
    const double hx = box.width() / panels_per_side;
    const double hy = box.height() / panels_per_side;
    grid.nodes.reserve(std::size_t(panels_per_side) * std::size_t(panels_per_side) *
                       g.nodes.size() * g.nodes.size());
    std::vector<double> masses;
    for (int px = 0; px < panels_per_side; ++px) {
        for (int py = 0; py < panels_per_side; ++py) {
            const double x0 = box.lo.x + px * hx, y0 = box.lo.y + py * hy;
            for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                for (std::size_t j = 0; j < g.nodes.size(); ++j) {
                    const Vec2 p{x0 + hx * 0.5 * (1.0 + g.nodes[i]),
                                 y0 + hy * 0.5 * (1.0 + g.nodes[j])};
                    const double val = f.evaluator(p);
                    if (val == 0.0) continue; // outside the compact support
                    const double w = val * g.weights[i] * g.weights[j] * hx * hy / 4.0;
                    grid.nodes.push_back(p);
                    grid.weights.push_back(w);
                    masses.push_back(w);
                }
            }
        }
    }
    grid.mass = pairwise_sum(masses);
    return grid;
}

SourceGrid SourceGrid::build_polar(const VorticityField& f, int radial_order, int angular_nodes) {
    const GaussRule& gr = gauss_legendre(radial_order);
    SourceGrid grid;
    std::vector<double> masses;
    for (const RadialPiece& piece : f.radial_pieces) {
        std::vector<double> breaks{0.0};
        for (double r : piece.kink_radii)
            if (r > 0 && r <= piece.radius + 1e-15) breaks.push_back(r);
        std::sort(breaks.begin(), breaks.end());
        for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
            const double mid = 0.5 * (breaks[p] + breaks[p + 1]);
            const double half = 0.5 * (breaks[p + 1] - breaks[p]);
            if (half <= 0) continue;
            for (std::size_t i = 0; i < gr.nodes.size(); ++i) {
                const double r = mid + half * gr.nodes[i];
                const double wr = gr.weights[i] * half;
                for (int m = 0; m < angular_nodes; ++m) {
                    const double th = 2 * kPi * (m + 0.5) / angular_nodes;
                    const Vec2 pnt = piece.center + r * Vec2{std::cos(th), std::sin(th)};
                    const double val = f.evaluator(pnt);
                    if (val == 0.0) continue;
                    const double w = val * wr * r * (2 * kPi / angular_nodes);
                    grid.nodes.push_back(pnt);
                    grid.weights.push_back(w);
                    masses.push_back(w);
                }
            }
        }
    }
    grid.mass = pairwise_sum(masses);
    return grid;
}

SourceGrid SourceGrid::build_auto(const VorticityField& f, double tol) {
    if (!f.radial_pieces.empty()) {
        bool disjoint = true;
        for (std::size_t a = 0; a < f.radial_pieces.size() && disjoint; ++a)
            for (std::size_t b = a + 1; b < f.radial_pieces.size(); ++b)
                if (dist(f.radial_pieces[a].center, f.radial_pieces[b].center) <
                    f.radial_pieces[a].radius + f.radial_pieces[b].radius) {
                    disjoint = false;
                    break;
                }
        if (disjoint) {
            SourceGrid grid = build_polar(f, 12, 64);
            if (std::abs(grid.mass - f.total_mass) < std::max(tol, 1e-9) * 100.0) return grid;
        }
    }
    int panels = 8;
    SourceGrid grid = build(f, panels, 6);
    while (panels < 64) {
        SourceGrid finer = build(f, panels * 2, 6);
        if (std::abs(finer.mass - grid.mass) < tol) return finer;
        grid = std::move(finer);
        panels *= 2;
    }
    return grid;
}

namespace {

// Adaptive 1D Gauss-Legendre with an interval-halving error check.
double adaptive_gl(const std::function<double(double)>& fn, double a, double b, double tol,
                   int depth = 0) {
    const GaussRule& g = gauss_legendre(10);
    const double whole = g.apply(a, b, fn);
    const double mid = 0.5 * (a + b);
    const double split = g.apply(a, mid, fn) + g.apply(mid, b, fn);
    if (std::abs(split - whole) <= tol || depth >= 24) return split;
    return adaptive_gl(fn, a, mid, tol / 2, depth + 1) + adaptive_gl(fn, mid, b, tol / 2, depth + 1);
}

// Entry/exit parameters of the ray x + t (cos theta, sin theta) through a box.
bool ray_box_range(Vec2 x, double theta, const Rect& box, double& t0, double& t1) {
    const double c = std::cos(theta), s = std::sin(theta);
    t0 = 0.0;
    t1 = 1e300;
    auto clip = [&](double p, double lo, double hi, double d) {
        if (std::abs(d) < 1e-15) return p >= lo && p <= hi;
        double ta = (lo - p) / d, tb = (hi - p) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        return true;
    };
    if (!clip(x.x, box.lo.x, box.hi.x, c)) return false;
    if (!clip(x.y, box.lo.y, box.hi.y, s)) return false;
    t0 = std::max(t0, 0.0);
    return t1 > t0;
}

} // namespace

Vec2 biot_savart(const VorticityField& f, Vec2 x, double tol) {
    if (tol <= 0) throw InvalidArgument("biot_savart needs tol > 0");
    // Polar integration around x: the 1/|x-y| kernel cancels against the
    // area element, leaving a bounded integrand. Known derivative kinks of
    // the field (circles) become explicit breakpoints in r and theta, so
    // the adaptive rules never have to find thin features on their own.
    const Rect box = f.support_box;
    std::vector<double> breaks{0.0, 2 * kPi};
    auto push_angle = [&](double a) {
        if (a < 0) a += 2 * kPi;
        if (a >= 2 * kPi) a -= 2 * kPi;
        breaks.push_back(a);
    };
    for (Vec2 corner : {box.lo, Vec2{box.hi.x, box.lo.y}, box.hi, Vec2{box.lo.x, box.hi.y}})
        push_angle(std::atan2(corner.y - x.y, corner.x - x.x));
    struct Circle {
        Vec2 c;
        double r;
    };
    std::vector<Circle> circles;
    for (const RadialPiece& piece : f.radial_pieces)
        for (double r : piece.kink_radii)
            if (r > 0) circles.push_back({piece.center, r});
    for (const Circle& circ : circles) {
        const Vec2 d = circ.c - x;
        const double dist_c = d.norm();
        const double base = std::atan2(d.y, d.x);
        if (dist_c > circ.r) { // tangent directions bound the visibility cone
            const double half = std::asin(std::min(1.0, circ.r / dist_c));
            push_angle(base - half);
            push_angle(base + half);
        }
        push_angle(base);
    }
    std::sort(breaks.begin(), breaks.end());

    const double tol_theta = tol / (2.0 * double(breaks.size()));
    auto radial = [&](double theta) {
        double t0, t1;
        if (!ray_box_range(x, theta, box, t0, t1)) return 0.0;
        const Vec2 dir{std::cos(theta), std::sin(theta)};
        std::vector<double> rbr{t0, t1};
        for (const Circle& circ : circles) {
            // |x + t dir - c|^2 = r^2
            const Vec2 d = x - circ.c;
            const double b = dot(d, dir);
            const double disc = b * b - (d.norm2() - circ.r * circ.r);
            if (disc <= 0) continue;
            const double sq = std::sqrt(disc);
            for (double t : {-b - sq, -b + sq})
                if (t > t0 && t < t1) rbr.push_back(t);
        }
        std::sort(rbr.begin(), rbr.end());
        double acc = 0.0;
        for (std::size_t p = 0; p + 1 < rbr.size(); ++p) {
            if (rbr[p + 1] - rbr[p] < 1e-15) continue;
            acc += adaptive_gl([&](double r) { return f.evaluator(x + r * dir); }, rbr[p],
                               rbr[p + 1], tol / (64.0 * double(rbr.size())));
        }
        return acc;
    };
    Cpx total{0.0, 0.0};
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        if (breaks[b + 1] - breaks[b] < 1e-14) continue;
        const double re = adaptive_gl(
            [&](double theta) { return (Cpx{0.0, -1.0} * std::polar(1.0, theta)).real() * radial(theta); },
            breaks[b], breaks[b + 1], tol_theta);
        const double im = adaptive_gl(
            [&](double theta) { return (Cpx{0.0, -1.0} * std::polar(1.0, theta)).imag() * radial(theta); },
            breaks[b], breaks[b + 1], tol_theta);
        total += Cpx{re, im};
    }
    total /= 2 * kPi;
    return to_vec(total);
}

Vec2 biot_savart(const SourceGrid& grid, Vec2 x) {
    const Cpx xc = to_cpx(x);
    Cpx sum{0.0, 0.0};
    for (std::size_t q = 0; q < grid.nodes.size(); ++q) {
        const Cpx d = xc - to_cpx(grid.nodes[q]);
        sum += grid.weights[q] * Cpx{0.0, 1.0} * d / std::norm(d);
    }
    return to_vec(sum / (2 * kPi));
}

double green_exterior(const ConformalMap& map, Vec2 x, Vec2 y) {
    const Cpx tx = map.forward(to_cpx(x));
    const Cpx ty = map.forward(to_cpx(y));
    if (std::abs(tx) <= 1.0 + 1e-12 || std::abs(ty) <= 1.0 + 1e-12)
        throw BoundaryEvaluation("green_exterior requires strictly exterior points");
    if (std::abs(tx - ty) == 0.0) throw InvalidArgument("green_exterior needs x != y");
    const Cpx ty_star = conjugate_point(ty);
    return std::log(std::abs(tx - ty) / (std::abs(tx - ty_star) * std::abs(ty))) / (2 * kPi);
}

Vec2 point_vortex_exterior_velocity(const ConformalMap& map, Vec2 y, double gamma, Vec2 x) {
    const Cpx tx = map.forward(to_cpx(x));
    const Cpx dtx = map.derivative(to_cpx(x));
    const Cpx ty = map.forward(to_cpx(y));
    const Cpx ty_star = conjugate_point(ty);
    const Cpx i{0.0, 1.0};
    const Cpx val = i * std::conj(dtx / (tx - ty)) - i * std::conj(dtx / (tx - ty_star)) +
                    i * std::conj(dtx / tx);
    return to_vec(gamma / (2 * kPi) * val);
}

ExteriorFlow::ExteriorFlow(ConformalMap map, const VorticityField& f, const QuadratureSpec& spec)
    : map_(std::move(map)), field_(&f), quad_tol_(spec.abs_tol) {
    grid_ = SourceGrid::build_auto(f, spec.abs_tol);
    t_nodes_.resize(grid_.nodes.size());
    t_nodes_conj_.resize(grid_.nodes.size());
    for (std::size_t q = 0; q < grid_.nodes.size(); ++q) {
        t_nodes_[q] = map_.forward(to_cpx(grid_.nodes[q]));
        t_nodes_conj_[q] = conjugate_point(t_nodes_[q]);
    }
}

Vec2 ExteriorFlow::velocity(Vec2 x) const {
    const Cpx xc = to_cpx(x);
    const Cpx tx = map_.forward(xc);
    if (std::abs(tx) < 1.0 - 1e-9)
        throw BoundaryEvaluation("velocity evaluation inside the obstacle");
    const Cpx dtx = map_.derivative(xc);
    const Cpx i{0.0, 1.0};

    // Whole-plane part, with the full polar treatment when x sits inside the
    // source support.
    Vec2 base;
    if (field_->support_box.padded(1e-3).contains(x))
        base = biot_savart(*field_, x, quad_tol_);
    else
        base = biot_savart(grid_, x);

    // Map-induced remainder: smooth kernels over the source grid. The direct
    // term is a stable difference against the whole-plane kernel.
    Cpx sum{0.0, 0.0};
    for (std::size_t q = 0; q < grid_.nodes.size(); ++q) {
        const Cpx d_plane = xc - to_cpx(grid_.nodes[q]);
        const Cpx d_map = tx - t_nodes_[q];
        const Cpx bracket = (dtx * d_plane - d_map) / (d_map * d_plane);
        const Cpx image = dtx / (tx - t_nodes_conj_[q]);
        sum += grid_.weights[q] * (i * std::conj(bracket) - i * std::conj(image));
    }
    sum /= 2 * kPi;
    const Cpx harmonic = grid_.mass / (2 * kPi) * i * std::conj(dtx / tx);
    return base + to_vec(sum + harmonic);
}

VelocityField ExteriorFlow::as_field() const {
    auto self = *this;
    return {[flow = std::move(self)](Vec2 x) { return flow.velocity(x); }, "exterior-one-obstacle"};
}

VelocityField whole_plane_field(const VorticityField& f, double tol) {
    return {[f, tol](Vec2 x) { return biot_savart(f, x, tol); }, "whole-plane"};
}

Vec2 exterior_velocity(const ConformalMap& map, const VorticityField& f, Vec2 x, double tol) {
    QuadratureSpec spec;
    spec.abs_tol = tol;
    ExteriorFlow flow(map, f, spec);
    return flow.velocity(x);
}

double circulation(const std::function<Vec2(Vec2)>& u, std::span<const Vec2> contour,
                   const PorousLattice* lattice) {
    if (contour.size() < 3) throw InvalidArgument("circulation needs a closed polyline");
    if (lattice) {
        for (Vec2 p : contour)
            if (!in_fluid(*lattice, p))
                throw ContourHitsObstacle("contour node inside an inclusion");
    }
    std::vector<Vec2> values(contour.size());
    for (std::size_t i = 0; i < contour.size(); ++i) values[i] = u(contour[i]);
    std::vector<double> terms;
    terms.reserve(contour.size());
    for (std::size_t i = 0; i < contour.size(); ++i) {
        const std::size_t j = (i + 1) % contour.size();
        const Vec2 seg = contour[j] - contour[i];
        terms.push_back(0.5 * dot(values[i] + values[j], seg));
    }
    return pairwise_sum(terms);
}

std::vector<Vec2> circle_contour(Vec2 center, double radius, int nodes) {
    std::vector<Vec2> out;
    out.reserve(std::size_t(nodes));
    for (int k = 0; k < nodes; ++k) {
        const double a = 2 * kPi * k / nodes;
        out.push_back(center + radius * Vec2{std::cos(a), std::sin(a)});
    }
    return out;
}

} // namespace rowperm
