#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "polyeit/vec2.hpp"

namespace polyeit {

/// Outer domain Omega. The unit square is [-1, 1]^2; the regular n-gon is
/// inscribed in a circle of the given radius, with its first vertex on the
/// positive x axis.
struct DomainSpec {
  enum class Kind { unit_square, regular_ngon };

  Kind kind = Kind::unit_square;
  int sides = 4;
  double radius = 1.0;
  double diameter_bound = 2.0 * std::sqrt(2.0);  // L
  double margin = 0.1;                           // d0

  static DomainSpec unit_square(double margin = 0.1);
  static DomainSpec regular_ngon(int sides, double radius = 1.0, double margin = 0.1);

  /// Boundary vertices in counter-clockwise order.
  std::vector<Vec2> boundary() const;
  double area() const;
  double perimeter() const;
  /// Distance from p to the boundary of the domain.
  double distance_to_boundary(const Vec2& p) const;
  bool contains(const Vec2& p) const;
  /// Throws ValidationError when the invariants do not hold.
  void validate() const;
};

/// Simple polygon, stored clockwise. Input in counter-clockwise order is
/// reversed at construction and `was_reversed()` records that.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> vertices);

  std::size_t size() const { return vertices_.size(); }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& operator[](std::size_t i) const { return vertices_[i]; }
  const Vec2& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
  bool was_reversed() const { return reversed_; }

  /// Negative for the stored (clockwise) orientation.
  double signed_area() const;
  double area() const { return -signed_area(); }
  double perimeter() const;
  Vec2 centroid() const;
  double diameter() const;
  double edge_length(std::size_t i) const;
  double min_edge_length() const;
  /// Interior angle at vertex i, in radians.
  double interior_angle(std::size_t i) const;
  bool is_convex() const;
  bool is_simple() const;
  /// Point-in-polygon test (boundary points count as inside).
  bool contains(const Vec2& p, double tol = 0.0) const;
  /// Distance from p to the polygon boundary.
  double boundary_distance(const Vec2& p) const;

  /// Same set, vertex list rotated so that vertex `start` comes first.
  Polygon relabeled(std::size_t start) const;

 private:
  std::vector<Vec2> vertices_;
  bool reversed_ = false;
};

/// Admissibility parameters: minimum angle alpha0, minimum side alpha1 and
/// distance d0 to the outer boundary.
struct ConstraintParams {
  double alpha0 = 0.5235987755982988;  // pi / 6
  double alpha1 = 0.1;
  double d0 = 0.1;

  void validate() const;
};

struct ConstraintCheck {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // signed slack; negative when violated
  std::string detail;
};

struct AdmissibilityReport {
  std::vector<ConstraintCheck> checks;

  bool ok() const;
  /// Name of the first violated constraint, or empty.
  std::string first_failure() const;
  std::string describe() const;
};

AdmissibilityReport validate_constraints(const Polygon& poly, const ConstraintParams& params,
                                         const DomainSpec& dom);

/// Per-vertex displacement vectors V_i.
struct VelocityField {
  std::vector<Vec2> v;

  VelocityField() = default;
  explicit VelocityField(std::vector<Vec2> values) : v(std::move(values)) {}
  static VelocityField zero(std::size_t n) { return VelocityField(std::vector<Vec2>(n)); }

  std::size_t size() const { return v.size(); }
  const Vec2& operator[](std::size_t i) const { return v[i]; }
  Vec2& operator[](std::size_t i) { return v[i]; }
  double max_norm() const;
  /// Euclidean norm of the stacked 2N vector.
  double l2_norm() const;
  VelocityField scaled(double s) const;
  friend VelocityField operator+(const VelocityField& a, const VelocityField& b);
};

/// P_i + t V_i for every vertex. Throws GeometryError when the result is not
/// simple, flips orientation, or (N >= 4) is not convex.
Polygon perturb(const Polygon& poly, const VelocityField& V, double t);

/// Largest |t| admissible for a vertex motion: d0 / (2 max_i |V_i|).
double admissible_t_bound(const VelocityField& V, double d0);

struct EdgeFrame {
  std::size_t edge = 0;
  Vec2 start;
  Vec2 end;
  Vec2 tangent;  // clockwise traversal direction
  Vec2 normal;   // outward
  double length = 0.0;
};

EdgeFrame edge_frame(const Polygon& poly, std::size_t i);

/// Relative on-edge tolerance used by interface_velocity.
inline constexpr double kOnEdgeTolerance = 1e-12;

/// Parameter s in [0, 1] of Q along edge i, measured from vertex i.
double edge_parameter(const Polygon& poly, std::size_t i, const Vec2& q);

/// Affine interface velocity on edge i:
///   V_i + s (V_{i+1} - V_i),  s = (Q - P_i).(P_{i+1} - P_i) / |P_{i+1} - P_i|^2.
Vec2 interface_velocity(const Polygon& poly, const VelocityField& V, std::size_t i, const Vec2& q);

/// Area of the symmetric difference of two convex polygons.
double symmetric_difference_area(const Polygon& a, const Polygon& b);

/// Intersection of two convex polygons (Sutherland-Hodgman); may be empty.
std::vector<Vec2> convex_intersection(const std::vector<Vec2>& subject,
                                      const std::vector<Vec2>& clip);

/// Absolute area of an arbitrary-orientation simple polygon.
double polygon_area(const std::vector<Vec2>& pts);

/// Symmetric Hausdorff distance between the boundaries of two polygons.
double hausdorff_distance(const Polygon& a, const Polygon& b);

/// Config-literal rendering `[[x, y], ...]` with 17 significant digits.
std::string polygon_literal(const Polygon& poly);

}  // namespace polyeit
