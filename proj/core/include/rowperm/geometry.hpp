#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rowperm/vec2.hpp"

namespace rowperm {

/// Tagged boundary corner: arclength parameter, location, fluid-side angle.
struct Corner {
    double param = 0.0;
    Vec2 point;
    double angle = 0.0; // radians, fluid side
};

/// Reference obstacle. The boundary is a counterclockwise Jordan curve,
/// arclength-parametrized on [0, perimeter); the shape fits in [-1,1]^2.
class ObstacleShape {
public:
    enum class Kind { Disk, Polygon, Custom };

    static ObstacleShape disk();
    /// Counterclockwise vertex list; corners are declared at every vertex.
    static ObstacleShape polygon(std::vector<Vec2> vertices);
    /// Regular n-gon with a vertex at (1, 0), inscribed in the unit circle.
    static ObstacleShape regular_polygon(int n);
    /// Closed polyline loaded from "x y" lines; corner detection by turning angle.
    static ObstacleShape custom(std::vector<Vec2> points);

    Kind kind() const { return kind_; }
    const std::vector<Corner>& corners() const { return corners_; }
    double wedge_rho() const { return wedge_rho_; }
    double perimeter() const { return perimeter_; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    double delta_inner() const { return delta_inner_; }
    bool vertically_symmetric() const { return vertically_symmetric_; }
    double area() const;

    /// Boundary point at arclength s (wraps modulo perimeter).
    Vec2 boundary_point(double s) const;
    /// One-sided unit tangents just before / after arclength s.
    Vec2 tangent_before(double s) const;
    Vec2 tangent_after(double s) const;

    /// Closed-set membership (boundary counts as inside).
    bool contains(Vec2 p) const;
    bool on_boundary(Vec2 p, double tol) const;

    /// Uniform boundary sample with n nodes (corner points are kept exact
    /// for polygons by sampling per edge).
    std::vector<Vec2> boundary_polyline(int n) const;

    std::string name;

private:
    ObstacleShape() = default;
    void finalize();

    Kind kind_ = Kind::Disk;
    std::vector<Vec2> vertices_;    // polygon/custom only
    std::vector<double> cum_len_;   // cumulative edge lengths
    std::vector<Corner> corners_;
    double wedge_rho_ = 0.0;
    double perimeter_ = 0.0;
    double delta_inner_ = 0.0;
    bool vertically_symmetric_ = true;
};

/// One row of shrunken inclusions along the unit segment.
class PorousLattice {
public:
    PorousLattice(std::shared_ptr<const ObstacleShape> shape, double epsilon, double d_eps);

    double epsilon() const { return epsilon_; }
    double d_eps() const { return d_eps_; }
    int n_holes() const { return n_holes_; }
    const std::vector<Vec2>& centers() const { return centers_; }
    const ObstacleShape& shape() const { return *shape_; }
    std::shared_ptr<const ObstacleShape> shape_ptr() const { return shape_; }

    /// Bounding box of inclusion i.
    Rect hole_box(int i) const;
    /// Closed membership in inclusion i.
    bool in_hole(int i, Vec2 p) const;

private:
    std::shared_ptr<const ObstacleShape> shape_;
    double epsilon_ = 0.0;
    double d_eps_ = 0.0;
    int n_holes_ = 0;
    std::vector<Vec2> centers_;
};

/// Builds the maximal row of inclusions on [0, 1].
PorousLattice build_lattice(std::shared_ptr<const ObstacleShape> shape, double epsilon,
                            double d_eps);

/// True iff x lies strictly outside every closed inclusion.
bool in_fluid(const PorousLattice& lattice, Vec2 x);

struct HypothesisCheck {
    bool pass = false;
    std::string detail;
};

struct HypothesisReport {
    HypothesisCheck h1; // Jordan boundary
    HypothesisCheck h2; // corner at (1,0) + wedge bound
    HypothesisCheck h3; // all fluid angles in (pi, 2pi)
    std::vector<double> measured_angles;
    double rho_estimate = 0.0;
    bool corner_at_right = false;
    bool vertically_symmetric = true;

    bool all_pass() const { return h1.pass && h2.pass && h3.pass; }
};

/// Re-measures corner angles from one-sided tangents, estimates the wedge
/// slope, and reports each hypothesis with a witness on failure.
HypothesisReport check_hypotheses(const ObstacleShape& shape);

/// Catalog lookup: "disk", "square", "regular-polygon:n", "custom:<path>".
std::shared_ptr<const ObstacleShape> shape_by_name(const std::string& name);

} // namespace rowperm
