#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "polyeit/geometry.hpp"
#include "polyeit/vec2.hpp"

namespace polyeit {

enum class Region : std::uint8_t { outside = 0, inside = 1 };

struct MeshTriangle {
  std::array<int, 3> v{};  // counter-clockwise
  Region region = Region::outside;
};

struct BoundaryEdge {
  int a = 0, b = 0;  // counter-clockwise along the outer boundary
  int marker = 0;    // index of the outer-boundary side
};

struct InterfaceEdge {
  int a = 0, b = 0;
  int poly_edge = 0;
  int tri_in = -1;
  int tri_out = -1;
};

/// Boundary nodes of the outer domain in counter-clockwise order, starting at
/// the first domain corner, with arc lengths and lumped (trapezoid) weights.
struct BoundaryLoop {
  std::vector<int> nodes;
  std::vector<double> arc;     // arc length of each node from the start
  std::vector<double> weight;  // lumped boundary mass of each node
  double perimeter = 0.0;
};

/// Interface-conforming triangulation. Immutable after construction.
class Mesh {
 public:
  Mesh(std::vector<Vec2> nodes, std::vector<MeshTriangle> triangles,
       std::vector<BoundaryEdge> boundary_edges, std::vector<InterfaceEdge> interface_edges);

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<MeshTriangle>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  const std::vector<InterfaceEdge>& interface_edges() const { return interface_edges_; }
  const BoundaryLoop& boundary() const { return loop_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t triangle_count() const { return triangles_.size(); }

  double triangle_area(std::size_t t) const;
  Vec2 centroid(std::size_t t) const;
  /// Gradients of the three P1 hat functions on triangle t.
  std::array<Vec2, 3> hat_gradients(std::size_t t) const;
  double total_area() const;

  /// True for nodes on the outer boundary.
  bool is_boundary_node(int n) const { return boundary_index_[static_cast<std::size_t>(n)] >= 0; }
  /// Position of node n in the boundary loop, or -1.
  int boundary_index(int n) const { return boundary_index_[static_cast<std::size_t>(n)]; }

  /// Per-triangle membership in `poly`, decided by centroid location.
  std::vector<Region> regions_for(const Polygon& poly) const;

  /// Triangle containing p (or -1), with barycentric coordinates.
  int locate(const Vec2& p, std::array<double, 3>* bary = nullptr, double tol = 1e-12) const;
  /// Triangles whose bounding boxes overlap the box [lo, hi].
  void candidates(const Vec2& lo, const Vec2& hi, std::vector<int>& out) const;

 private:
  void build_boundary_loop();
  void build_grid();

  std::vector<Vec2> nodes_;
  std::vector<MeshTriangle> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<InterfaceEdge> interface_edges_;
  BoundaryLoop loop_;
  std::vector<int> boundary_index_;

  // Uniform bucket grid over triangle bounding boxes.
  Vec2 grid_lo_;
  double grid_cell_ = 1.0;
  int grid_nx_ = 1, grid_ny_ = 1;
  std::vector<int> grid_start_;
  std::vector<int> grid_items_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Local size control: size(x) = max(h_min, h (dist(x, v) / r_g)^mu) within
/// r_g of an inclusion vertex v, and h elsewhere.
struct GradingSpec {
  double h = 0.05;
  double h_min = 0.05 / 64.0;
  double mu = 2.0;
  double r_g = 0.2;
  /// Optional finer size along inclusion edges (0 disables).
  double interface_h = 0.0;

  static GradingSpec with_defaults(double h);
  void validate() const;
  double size_at_distance(double dist_to_vertex) const;
};

struct MeshOptions {
  /// Minimum angle enforced by refinement, degrees.
  double min_angle_deg = 20.0;
  /// Reject meshes below the floor (single-polygon meshes only).
  bool enforce_quality = true;
  /// When set, the mesh is generated for these polygons and its nodes are
  /// then moved onto the requested polygons (same vertex counts). Keeps the
  /// connectivity fixed across small polygon motions.
  std::optional<std::vector<Polygon>> anchor;
};

/// Graded conforming triangulation of the domain. Region labels follow the
/// first polygon; a second polygon is only constrained geometrically.
MeshPtr generate_mesh(const DomainSpec& dom, const std::vector<Polygon>& polys, const GradingSpec& grading,
                      const MeshOptions& opts = {});

struct MeshQuality {
  double min_angle_deg = 0.0;
  double max_aspect = 0.0;  // longest edge / (2 sqrt(3) inradius); 1 for equilateral
  std::size_t node_count = 0;
  std::size_t triangle_count = 0;
  double h_eff = 0.0;  // max circumdiameter
};

MeshQuality mesh_quality(const Mesh& m);

struct RingEdge {
  int a = 0, b = 0;  // mesh nodes, in clockwise polygon order
  int poly_edge = 0;
  int tri_in = -1, tri_out = -1;
  double s0 = 0.0, s1 = 0.0;  // edge parameters of a and b along the polygon edge
  double length = 0.0;
  Vec2 midpoint;
};

/// Interface edges along a polygon boundary, ordered clockwise.
struct InterfaceRing {
  std::vector<RingEdge> edges;
  double length() const;
};

/// Extracts the ordered interface ring of `poly` from a mesh that conforms to it.
InterfaceRing interface_ring(const Mesh& m, const Polygon& poly);

void write_mesh(std::ostream& os, const Mesh& m);
MeshPtr read_mesh(std::istream& is);

/// Structured mesh of [-1, 1]^2 with n x n squares, each cut into two right
/// isosceles triangles. Used by tests and validation paths.
MeshPtr structured_square_mesh(int n);

}  // namespace polyeit
