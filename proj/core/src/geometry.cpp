#include "rowperm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rowperm/errors.hpp"

namespace rowperm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBoundaryTol = 1e-12;

double wrap_param(double s, double perimeter) {
    s = std::fmod(s, perimeter);
    if (s < 0) s += perimeter;
    return s;
}

// Fluid-side angle from the two edge directions at a ccw vertex.
double fluid_angle(Vec2 t_in, Vec2 t_out) {
    const double turn = std::atan2(cross(t_in, t_out), dot(t_in, t_out));
    return kPi + turn;
}

double point_segment_dist(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.norm2();
    double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return dist(p, a + t * ab);
}

bool polygon_contains(const std::vector<Vec2>& v, Vec2 p) {
    // Crossing-number test with boundary counted as inside.
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (point_segment_dist(p, v[i], v[(i + 1) % n]) < kBoundaryTol) return true;
    }
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const bool cross_y = (v[i].y > p.y) != (v[j].y > p.y);
        if (cross_y) {
            const double xi = v[j].x + (p.y - v[j].y) / (v[i].y - v[j].y) * (v[i].x - v[j].x);
            if (p.x < xi) inside = !inside;
        }
    }
    return inside;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
        const double v = cross(q - p, r - p);
        return (v > 1e-15) - (v < -1e-15);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d);
    const int o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 != o2 && o3 != o4;
}

} // namespace

void ObstacleShape::finalize() {
    if (kind_ == Kind::Disk) {
        perimeter_ = 2 * kPi;
        delta_inner_ = 1.0;
        vertically_symmetric_ = true;
        wedge_rho_ = 0.0; // no positive wedge slope exists for a smooth tip
        return;
    }
    const std::size_t n = vertices_.size();
    if (n < 3) throw DegenerateBoundary("polygon needs at least 3 vertices");
    cum_len_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        cum_len_[i + 1] = cum_len_[i] + dist(vertices_[i], vertices_[(i + 1) % n]);
    perimeter_ = cum_len_[n];
    if (perimeter_ <= 0) throw DegenerateBoundary("zero-perimeter boundary");

    // Enforce counterclockwise orientation.
    double twice_area = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        twice_area += cross(vertices_[i], vertices_[(i + 1) % n]);
    if (twice_area < 0) {
        std::reverse(vertices_.begin(), vertices_.end());
        for (std::size_t i = 0; i < n; ++i)
            cum_len_[i + 1] = cum_len_[i] + dist(vertices_[i], vertices_[(i + 1) % n]);
    }

    corners_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 prev = vertices_[(i + n - 1) % n];
        const Vec2 next = vertices_[(i + 1) % n];
        const Vec2 t_in = (vertices_[i] - prev) / dist(prev, vertices_[i]);
        const Vec2 t_out = (next - vertices_[i]) / dist(vertices_[i], next);
        const double turn = std::atan2(cross(t_in, t_out), dot(t_in, t_out));
        if (std::abs(turn) < 1e-9) continue; // collinear join, not a corner
        corners_.push_back({cum_len_[i], vertices_[i], fluid_angle(t_in, t_out)});
    }

    for (Vec2 v : vertices_) {
        if (std::abs(v.x) > 1.0 + 1e-12 || std::abs(v.y) > 1.0 + 1e-12)
            throw DegenerateBoundary("shape does not fit in [-1,1]^2");
    }

    delta_inner_ = 1e30;
    for (std::size_t i = 0; i < n; ++i)
        delta_inner_ = std::min(delta_inner_, point_segment_dist({0, 0}, vertices_[i], vertices_[(i + 1) % n]));
    if (!polygon_contains(vertices_, {0, 0})) delta_inner_ = 0.0;

    vertically_symmetric_ = true;
    for (Vec2 v : vertices_) {
        bool matched = false;
        for (Vec2 w : vertices_) {
            if (std::abs(v.x - w.x) < 1e-9 && std::abs(v.y + w.y) < 1e-9) {
                matched = true;
                break;
            }
        }
        if (!matched) {
            vertically_symmetric_ = false;
            break;
        }
    }

    // Wedge slope for (H2): largest rho such that boundary samples satisfy
    // x <= 1 - rho |y|, then shrunk by 10%.
    double rho = 1e30;
    const auto poly = boundary_polyline(1024);
    for (Vec2 p : poly) {
        if (std::abs(p.y) < 1e-9) {
            if (p.x > 1.0 + 1e-9) rho = 0.0;
            continue;
        }
        rho = std::min(rho, (1.0 - p.x) / std::abs(p.y));
    }
    wedge_rho_ = rho > 0 && rho < 1e29 ? 0.9 * rho : 0.0;
}

ObstacleShape ObstacleShape::disk() {
    ObstacleShape s;
    s.kind_ = Kind::Disk;
    s.name = "disk";
    s.finalize();
    return s;
}

ObstacleShape ObstacleShape::polygon(std::vector<Vec2> vertices) {
    ObstacleShape s;
    s.kind_ = Kind::Polygon;
    s.vertices_ = std::move(vertices);
    s.name = "polygon";
    s.finalize();
    return s;
}

ObstacleShape ObstacleShape::regular_polygon(int n) {
    if (n < 3) throw InvalidArgument("regular polygon needs n >= 3");
    std::vector<Vec2> v;
    v.reserve(std::size_t(n));
    for (int k = 0; k < n; ++k) {
        const double a = 2 * kPi * k / n;
        v.push_back({std::cos(a), std::sin(a)});
    }
    ObstacleShape s = polygon(std::move(v));
    s.name = "regular-polygon:" + std::to_string(n);
    return s;
}

ObstacleShape ObstacleShape::custom(std::vector<Vec2> points) {
    ObstacleShape s;
    s.kind_ = Kind::Custom;
    s.vertices_ = std::move(points);
    s.name = "custom";
    s.finalize();
    return s;
}

double ObstacleShape::area() const {
    if (kind_ == Kind::Disk) return kPi;
    double twice = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i)
        twice += cross(vertices_[i], vertices_[(i + 1) % n]);
    return std::abs(twice) / 2;
}

Vec2 ObstacleShape::boundary_point(double s) const {
    s = wrap_param(s, perimeter_);
    if (kind_ == Kind::Disk) return {std::cos(s), std::sin(s)};
    const auto it = std::upper_bound(cum_len_.begin(), cum_len_.end(), s);
    std::size_t i = std::size_t(std::distance(cum_len_.begin(), it));
    i = (i == 0 ? 0 : i - 1);
    if (i >= vertices_.size()) i = vertices_.size() - 1;
    const Vec2 a = vertices_[i], b = vertices_[(i + 1) % vertices_.size()];
    const double len = cum_len_[i + 1] - cum_len_[i];
    const double t = len > 0 ? (s - cum_len_[i]) / len : 0.0;
    return a + t * (b - a);
}

namespace {
Vec2 edge_direction(const std::vector<Vec2>& v, const std::vector<double>& cum, double s,
                    bool before) {
    // `after`: the edge with s in [cum[i], cum[i+1]); `before`: the edge
    // with s in (cum[i], cum[i+1]], so vertex parameters pick the two
    // one-sided directions.
    const std::size_t n = v.size();
    std::size_t i = 0;
    if (before) {
        if (s <= 1e-12) {
            i = n - 1; // wrap: approach vertex 0 along the last edge
        } else {
            while (i + 1 < n && cum[i + 1] < s - 1e-12) ++i;
        }
    } else {
        while (i + 1 < n && cum[i + 1] <= s + 1e-12) ++i;
    }
    const Vec2 d = v[(i + 1) % n] - v[i];
    return d / d.norm();
}
} // namespace

Vec2 ObstacleShape::tangent_before(double s) const {
    if (kind_ == Kind::Disk) {
        const Vec2 p = boundary_point(s);
        return {-p.y, p.x};
    }
    return edge_direction(vertices_, cum_len_, wrap_param(s, perimeter_), true);
}

Vec2 ObstacleShape::tangent_after(double s) const {
    if (kind_ == Kind::Disk) {
        const Vec2 p = boundary_point(s);
        return {-p.y, p.x};
    }
    return edge_direction(vertices_, cum_len_, wrap_param(s, perimeter_), false);
}

bool ObstacleShape::contains(Vec2 p) const {
    if (kind_ == Kind::Disk) return p.norm2() <= 1.0 + kBoundaryTol;
    return polygon_contains(vertices_, p);
}

bool ObstacleShape::on_boundary(Vec2 p, double tol) const {
    if (kind_ == Kind::Disk) return std::abs(p.norm() - 1.0) <= tol;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i)
        if (point_segment_dist(p, vertices_[i], vertices_[(i + 1) % n]) <= tol) return true;
    return false;
}

std::vector<Vec2> ObstacleShape::boundary_polyline(int n) const {
    std::vector<Vec2> out;
    out.reserve(std::size_t(n));
    if (kind_ == Kind::Disk) {
        for (int k = 0; k < n; ++k) out.push_back(boundary_point(perimeter_ * k / n));
        return out;
    }
    // Sample per edge, keeping vertices exact.
    const std::size_t nv = vertices_.size();
    for (std::size_t i = 0; i < nv; ++i) {
        const Vec2 a = vertices_[i], b = vertices_[(i + 1) % nv];
        const double len = cum_len_[i + 1] - cum_len_[i];
        const int per_edge = std::max(1, int(std::lround(n * len / perimeter_)));
        for (int k = 0; k < per_edge; ++k) out.push_back(a + (double(k) / per_edge) * (b - a));
    }
    return out;
}

PorousLattice::PorousLattice(std::shared_ptr<const ObstacleShape> shape, double epsilon,
                             double d_eps)
    : shape_(std::move(shape)), epsilon_(epsilon), d_eps_(d_eps) {
    if (epsilon <= 0 || d_eps <= 0)
        throw NonPositiveScale("build_lattice requires epsilon > 0 and d_eps > 0");
    if (epsilon > 1.0) throw InvalidArgument("epsilon > 1 leaves no room on the unit segment");
    n_holes_ = int((1.0 + d_eps) / (epsilon + d_eps));
    centers_.reserve(std::size_t(n_holes_));
    for (int i = 1; i <= n_holes_; ++i)
        centers_.push_back({epsilon / 2 + (i - 1) * (epsilon + d_eps), 0.0});
}

Rect PorousLattice::hole_box(int i) const {
    const Vec2 c = centers_[std::size_t(i)];
    const double h = epsilon_ / 2;
    return {{c.x - h, c.y - h}, {c.x + h, c.y + h}};
}

bool PorousLattice::in_hole(int i, Vec2 p) const {
    const Vec2 local = (p - centers_[std::size_t(i)]) / (epsilon_ / 2);
    if (std::abs(local.x) > 1.0 + 1e-12 || std::abs(local.y) > 1.0 + 1e-12) return false;
    return shape_->contains(local);
}

PorousLattice build_lattice(std::shared_ptr<const ObstacleShape> shape, double epsilon,
                            double d_eps) {
    return PorousLattice(std::move(shape), epsilon, d_eps);
}

bool in_fluid(const PorousLattice& lattice, Vec2 x) {
    const double h = lattice.epsilon() / 2;
    if (std::abs(x.y) > h + 1e-12) return true;
    for (int i = 0; i < lattice.n_holes(); ++i) {
        if (std::abs(x.x - lattice.centers()[std::size_t(i)].x) > h + 1e-12) continue;
        if (lattice.in_hole(i, x)) return false;
    }
    return true;
}

HypothesisReport check_hypotheses(const ObstacleShape& shape) {
    HypothesisReport rep;
    rep.vertically_symmetric = shape.vertically_symmetric();

    // (H1): Jordan curve on a dense sample.
    const auto poly = shape.boundary_polyline(2048);
    bool jordan = true;
    Vec2 witness;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n && jordan; ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % n];
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue; // adjacent around the wrap
            if (segments_intersect(a, b, poly[j], poly[(j + 1) % n])) {
                jordan = false;
                witness = poly[j];
                break;
            }
        }
    }
    rep.h1.pass = jordan;
    rep.h1.detail = jordan ? "boundary is simple on 2048-node sample"
                           : "self-intersection near (" + std::to_string(witness.x) + ", " +
                                 std::to_string(witness.y) + ")";

    // Re-measure corner angles from one-sided tangent limits.
    for (const Corner& c : shape.corners()) {
        const Vec2 t_in = shape.tangent_before(c.param);
        const Vec2 t_out = shape.tangent_after(c.param);
        if (!(std::isfinite(t_in.x) && std::isfinite(t_out.x)))
            throw DegenerateBoundary("tangent limit does not exist at corner");
        const double measured = kPi + std::atan2(cross(t_in, t_out), dot(t_in, t_out));
        rep.measured_angles.push_back(measured);
        if (std::abs(measured - c.angle) > 1e-3)
            throw InvalidArgument("declared corner angle disagrees with tangent measurement by " +
                                  std::to_string(std::abs(measured - c.angle)) + " rad");
    }

    // (H2): a corner at (1,0) and a positive wedge slope.
    rep.corner_at_right = false;
    for (const Corner& c : shape.corners())
        if (dist(c.point, {1.0, 0.0}) < 1e-9) rep.corner_at_right = true;
    rep.rho_estimate = shape.wedge_rho();
    bool wedge_ok = rep.rho_estimate > 0.0;
    if (wedge_ok) {
        // Verify the estimate on 1024 fresh samples.
        for (int k = 0; k < 1024; ++k) {
            const Vec2 p = shape.boundary_point(shape.perimeter() * (k + 0.37) / 1024);
            if (p.x > 1.0 - rep.rho_estimate * std::abs(p.y) + 1e-9) {
                wedge_ok = false;
                break;
            }
        }
    }
    rep.h2.pass = rep.corner_at_right && wedge_ok;
    if (!rep.corner_at_right)
        rep.h2.detail = "no corner at (1,0)";
    else if (!wedge_ok)
        rep.h2.detail = "no positive wedge slope passes the sample test";
    else
        rep.h2.detail = "corner at (1,0), rho = " + std::to_string(rep.rho_estimate);

    // (H3): every fluid angle strictly inside (pi, 2pi). Vacuous without corners.
    rep.h3.pass = true;
    rep.h3.detail = shape.corners().empty() ? "no corners declared (vacuous)" : "all angles in (pi, 2pi)";
    for (std::size_t k = 0; k < shape.corners().size(); ++k) {
        const double theta = shape.corners()[k].angle;
        if (!(theta > kPi + 1e-9 && theta < 2 * kPi - 1e-9)) {
            rep.h3.pass = false;
            rep.h3.detail = "angle " + std::to_string(theta) + " at corner " + std::to_string(k) +
                            " outside (pi, 2pi)";
            break;
        }
    }
    return rep;
}

std::shared_ptr<const ObstacleShape> shape_by_name(const std::string& name) {
    if (name == "disk") return std::make_shared<ObstacleShape>(ObstacleShape::disk());
    if (name == "square") {
        auto s = std::make_shared<ObstacleShape>(ObstacleShape::regular_polygon(4));
        return s;
    }
    const std::string reg = "regular-polygon:";
    if (name.rfind(reg, 0) == 0) {
        const int n = std::stoi(name.substr(reg.size()));
        return std::make_shared<ObstacleShape>(ObstacleShape::regular_polygon(n));
    }
    const std::string cus = "custom:";
    if (name.rfind(cus, 0) == 0) {
        const std::string path = name.substr(cus.size());
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot open boundary point file: " + path);
        std::vector<Vec2> pts;
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            double x, y;
            if (ls >> x >> y) pts.push_back({x, y});
        }
        if (pts.size() >= 2 && dist(pts.front(), pts.back()) < 1e-12) pts.pop_back();
        return std::make_shared<ObstacleShape>(ObstacleShape::custom(std::move(pts)));
    }
    throw InvalidArgument("unknown shape name: " + name);
}

} // namespace rowperm
