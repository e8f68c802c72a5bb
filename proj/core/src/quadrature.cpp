#include "rowperm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "rowperm/errors.hpp"
#include "rowperm/geometry.hpp"
#include "rowperm/util.hpp"

namespace rowperm {

namespace {

// Eigenvalues and first eigenvector components of a symmetric tridiagonal
// matrix (QL with implicit shifts). diag/off are destroyed; off[i] couples
// i and i+1. first_row accumulates the first component of each eigenvector.
void tridiag_eigen(std::vector<double>& diag, std::vector<double>& off,
                   std::vector<double>& first_row) {
    const int n = int(diag.size());
    first_row.assign(std::size_t(n), 0.0);
    // z starts as identity's first row; rotations update it.
    std::vector<double>& z = first_row;
    z[0] = 1.0;
    off.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(diag[std::size_t(m)]) + std::abs(diag[std::size_t(m) + 1]);
                if (std::abs(off[std::size_t(m)]) <= 1e-16 * dd) break;
            }
            if (m != l) {
                if (++iter == 60)
                    throw Error("Eigensolve", "tridiagonal QL did not converge");
                double g = (diag[std::size_t(l) + 1] - diag[std::size_t(l)]) / (2.0 * off[std::size_t(l)]);
                double r = std::hypot(g, 1.0);
                g = diag[std::size_t(m)] - diag[std::size_t(l)] +
                    off[std::size_t(l)] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * off[std::size_t(i)];
                    const double b = c * off[std::size_t(i)];
                    r = std::hypot(f, g);
                    off[std::size_t(i) + 1] = r;
                    if (r == 0.0) {
                        diag[std::size_t(i) + 1] -= p;
                        off[std::size_t(m)] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = diag[std::size_t(i) + 1] - p;
                    r = (diag[std::size_t(i)] - g) * s + 2.0 * c * b;
                    p = s * r;
                    diag[std::size_t(i) + 1] = g + p;
                    g = c * r - b;
                    f = z[std::size_t(i) + 1];
                    z[std::size_t(i) + 1] = s * z[std::size_t(i)] + c * f;
                    z[std::size_t(i)] = c * z[std::size_t(i)] - s * f;
                }
                if (r == 0.0 && m - 1 >= l) continue;
                diag[std::size_t(l)] -= p;
                off[std::size_t(l)] = g;
                off[std::size_t(m)] = 0.0;
            }
        } while (m != l);
    }
}

GaussRule golub_welsch(std::vector<double> a, std::vector<double> b_sq, double mu0) {
    const std::size_t n = a.size();
    std::vector<double> off(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) off[i] = std::sqrt(b_sq[i + 1]);
    std::vector<double> first;
    tridiag_eigen(a, off, first);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rule.nodes[i] = a[idx[i]];
        rule.weights[i] = mu0 * first[idx[i]] * first[idx[i]];
    }
    return rule;
}

} // namespace

GaussRule gauss_jacobi(int n, double alpha, double beta) {
    // Recurrence coefficients of the Jacobi weight (1-x)^a (1+x)^b.
    std::vector<double> a(std::size_t(n), 0.0);
    std::vector<double> b2(std::size_t(n), 0.0);
    const double ab = alpha + beta;
    for (int k = 0; k < n; ++k) {
        const double kk = double(k);
        const double denom = (2 * kk + ab) * (2 * kk + ab + 2);
        a[std::size_t(k)] = (k == 0 && ab == 0.0) ? (beta - alpha) / 2.0
                                                  : (beta * beta - alpha * alpha) / denom;
        if (k > 0) {
            const double t = 2 * kk + ab;
            b2[std::size_t(k)] =
                4.0 * kk * (kk + alpha) * (kk + beta) * (kk + ab) / (t * t * (t + 1.0) * (t - 1.0));
        }
    }
    const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) * std::tgamma(beta + 1.0) /
                       std::tgamma(ab + 2.0);
    return golub_welsch(std::move(a), std::move(b2), mu0);
}

const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_jacobi(n, 0.0, 0.0)).first;
    return it->second;
}

std::vector<double> graded_breakpoints(double a, double b, double finest, int max_panels,
                                       double ratio) {
    std::vector<double> pts{a};
    double w = b - a;
    double h = finest;
    double pos = a;
    int count = 0;
    while (pos + h < b && count + 1 < max_panels) {
        pos += h;
        pts.push_back(pos);
        h *= ratio;
        ++count;
        if (h > w) break;
    }
    pts.push_back(b);
    return pts;
}

double integrate_rect(const std::function<double(Vec2)>& fn, const Rect& r, int order) {
    const GaussRule& g = gauss_legendre(order);
    const double cx = 0.5 * (r.lo.x + r.hi.x), hx = 0.5 * (r.hi.x - r.lo.x);
    const double cy = 0.5 * (r.lo.y + r.hi.y), hy = 0.5 * (r.hi.y - r.lo.y);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < g.nodes.size(); ++j)
            row += g.weights[j] * fn({cx + hx * g.nodes[i], cy + hy * g.nodes[j]});
        s += g.weights[i] * row;
    }
    return s * hx * hy;
}

namespace {

enum class CellClass { Fluid, Solid, Mixed };

CellClass classify_cell(const Rect& r, const PorousLattice& holes, int samples) {
    int inside = 0, total = 0;
    for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
            const Vec2 p{r.lo.x + (i + 0.5) / samples * r.width(),
                         r.lo.y + (j + 0.5) / samples * r.height()};
            ++total;
            if (!in_fluid(holes, p)) ++inside;
        }
    }
    if (inside == 0) return CellClass::Fluid;
    if (inside == total) return CellClass::Solid;
    return CellClass::Mixed;
}

// Masked tensor rule: nodes inside a hole contribute zero.
double integrate_cell_masked(const std::function<double(Vec2)>& fn, const Rect& r,
                             const PorousLattice* holes, int order) {
    const GaussRule& g = gauss_legendre(order);
    const double cx = 0.5 * (r.lo.x + r.hi.x), hx = 0.5 * (r.hi.x - r.lo.x);
    const double cy = 0.5 * (r.lo.y + r.hi.y), hy = 0.5 * (r.hi.y - r.lo.y);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < g.nodes.size(); ++j) {
            const Vec2 p{cx + hx * g.nodes[i], cy + hy * g.nodes[j]};
            if (holes && !in_fluid(*holes, p)) continue;
            row += g.weights[j] * fn(p);
        }
        s += g.weights[i] * row;
    }
    return s * hx * hy;
}

struct CellTask {
    Rect rect;
    int depth;
};

} // namespace

double integrate_region(const std::function<double(Vec2)>& fn, std::span<const Rect> region,
                        const PorousLattice* holes, const QuadratureSpec& spec) {
    std::vector<double> contributions;
    const double min_hole_cell =
        holes ? 1e-3 * holes->epsilon() : 0.0; // splitting floor at hole boundaries

    std::vector<CellTask> stack;
    for (const Rect& r : region) stack.push_back({r, 0});
    std::size_t budget = 1u << 22;

    while (!stack.empty()) {
        const CellTask task = stack.back();
        stack.pop_back();
        if (budget-- == 0)
            throw QuadratureBudgetExceeded("integrate_region cell budget exhausted");

        const Rect& r = task.rect;
        CellClass cls = CellClass::Fluid;
        if (holes) cls = classify_cell(r, *holes, spec.base_order);
        if (cls == CellClass::Solid) continue;

        const bool tiny = std::max(r.width(), r.height()) < min_hole_cell;
        if (cls == CellClass::Mixed && !tiny && task.depth < spec.max_subdivisions + 10) {
            const Vec2 c = r.center();
            stack.push_back({{r.lo, c}, task.depth + 1});
            stack.push_back({{{c.x, r.lo.y}, {r.hi.x, c.y}}, task.depth + 1});
            stack.push_back({{{r.lo.x, c.y}, {c.x, r.hi.y}}, task.depth + 1});
            stack.push_back({{c, r.hi}, task.depth + 1});
            continue;
        }
        if (cls == CellClass::Mixed) {
            contributions.push_back(integrate_cell_masked(fn, r, holes, 2 * spec.base_order));
            continue;
        }

        // Pure fluid cell: accept when coarse and refined estimates agree.
        const double coarse = integrate_rect(fn, r, spec.base_order);
        if (task.depth >= spec.max_subdivisions) {
            contributions.push_back(coarse);
            continue;
        }
        const Vec2 c = r.center();
        const Rect q[4] = {{r.lo, c}, {{c.x, r.lo.y}, {r.hi.x, c.y}}, {{r.lo.x, c.y}, {c.x, r.hi.y}}, {c, r.hi}};
        double fine = 0.0;
        for (const Rect& sub : q) fine += integrate_rect(fn, sub, spec.base_order);
        const double err = std::abs(fine - coarse);
        if (err < spec.abs_tol * 0.25 || task.depth >= spec.max_subdivisions) {
            contributions.push_back(fine);
        } else {
            for (const Rect& sub : q) stack.push_back({sub, task.depth + 1});
        }
    }
    std::sort(contributions.begin(), contributions.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });
    return pairwise_sum(contributions);
}

double l2_norm_region(const std::function<Vec2(Vec2)>& g, std::span<const Rect> region,
                      const PorousLattice* holes, const QuadratureSpec& spec) {
    auto sq = [&g](Vec2 p) {
        const Vec2 v = g(p);
        return v.norm2();
    };
    const double val = integrate_region(sq, region, holes, spec);
    return std::sqrt(std::max(0.0, val));
}

double sup_norm_region(const std::function<double(Vec2)>& g, std::span<const Rect> region,
                       const QuadratureSpec& spec) {
    struct Sample {
        double val;
        Vec2 at;
        double cell;
    };
    std::vector<Sample> samples;
    for (const Rect& r : region) {
        const int nx = std::max(8, int(64 * r.width() / std::max(r.width(), r.height())));
        const int ny = std::max(8, int(64 * r.height() / std::max(r.width(), r.height())));
        for (int i = 0; i <= nx; ++i) {
            for (int j = 0; j <= ny; ++j) {
                const Vec2 p{r.lo.x + r.width() * i / nx, r.lo.y + r.height() * j / ny};
                samples.push_back({g(p), p, std::max(r.width() / nx, r.height() / ny)});
            }
        }
    }
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.val > b.val; });
    double best = samples.empty() ? 0.0 : samples.front().val;
    const std::size_t top = std::max<std::size_t>(1, samples.size() / 10);
    for (std::size_t k = 0; k < top && k < samples.size(); ++k) {
        const Sample& s = samples[k];
        const int refine = 2 * spec.base_order;
        for (int i = -refine; i <= refine; ++i) {
            for (int j = -refine; j <= refine; ++j) {
                const Vec2 p{s.at.x + s.cell * i / refine, s.at.y + s.cell * j / refine};
                bool in_any = false;
                for (const Rect& r : region)
                    if (r.contains(p)) { in_any = true; break; }
                if (!in_any) continue;
                best = std::max(best, g(p));
            }
        }
    }
    return best;
}

} // namespace rowperm
