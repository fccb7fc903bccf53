#pragma once

#include <iosfwd>
#include <vector>

#include "polyeit/fem.hpp"
#include "polyeit/geometry.hpp"
#include "polyeit/maps.hpp"
#include "polyeit/mesh.hpp"

namespace polyeit {

/// M0 g = (g . tau) tau + (1/k)(g . n) n in the frame of an interface edge.
Vec2 apply_m0(const Vec2& grad_e, const EdgeFrame& frame, double k);

/// Per-vertex vectors g_i with derivative = sum_i g_i . V_i.
struct ShapeGradient {
  std::vector<Vec2> g;

  std::size_t size() const { return g.size(); }
  double pair(const VelocityField& V) const;
  /// Euclidean norm of the stacked 2N vector.
  double norm() const;
  ShapeGradient scaled(double s) const;
  friend ShapeGradient operator+(const ShapeGradient& a, const ShapeGradient& b);
  /// As a velocity field (same components).
  VelocityField as_velocity() const;
};

/// CSV `vertex_index,gx,gy`.
void write_shape_gradient_csv(std::ostream& os, const ShapeGradient& g);

/// (k - 1) sum_e |e| (M0 grad u^e . grad v^e)(Phi^V(mid e) . n) over the ring.
double shape_derivative(const Polygon& poly, double k, const InterfaceRing& ring, const std::vector<Vec2>& u_ext,
                        const std::vector<Vec2>& v_ext, const VelocityField& V);
/// Same quantity written with the interior trace of v and no M0:
/// (k - 1) sum_e |e| (grad u^e . grad v^i)(Phi^V . n).
double shape_derivative_mixed(const Polygon& poly, double k, const InterfaceRing& ring,
                              const std::vector<Vec2>& u_ext, const std::vector<Vec2>& v_int, const VelocityField& V);
/// Hat-weighted split of the edge integrals onto the polygon vertices.
ShapeGradient per_vertex_gradient(const Polygon& poly, double k, const InterfaceRing& ring,
                                  const std::vector<Vec2>& u_ext, const std::vector<Vec2>& v_ext);

/// Derivative of the functional of `spec` at its polygon, from a forward
/// state. The Neumann pairing carries the opposite sign.
ShapeGradient functional_gradient(const FunctionalSpec& spec, const ForwardState& st);

/// Boundary voltages sampled by arc length from the first domain corner.
struct BoundarySamples {
  std::vector<double> arc;
  std::vector<double> values;
  double perimeter = 0.0;

  static BoundarySamples from_field(const Field& u);
  /// Periodic linear interpolation at the boundary nodes of m.
  std::vector<double> on(const Mesh& m) const;
};

/// J = 1/2 sum_i w_i (u_i - meas_i)^2 over the boundary nodes of u's mesh.
double misfit_value(const Field& u, const std::vector<double>& meas);

/// Meshes, solves the Neumann problem for f and returns J.
double misfit(const DomainSpec& dom, const Polygon& poly, const ConductivitySpec& k, const BoundaryData& f,
              const BoundarySamples& meas, const GradingSpec& grading);

/// Neumann solution with data u0 - meas projected onto mean zero.
Field adjoint_state(const MeshPtr& m, const ConductivitySpec& k, const Field& u0, const std::vector<double>& meas);

/// Gradient of J: the Neumann-pairing derivative with v := w0, which is
/// -(per_vertex_gradient with w0 traces).
ShapeGradient misfit_gradient(const Polygon& poly, double k, const InterfaceRing& ring,
                              const std::vector<Vec2>& u0_ext, const std::vector<Vec2>& w0_ext);

struct MisfitEvaluation {
  double J = 0.0;
  ShapeGradient gradient;
  MeshPtr mesh;
  Field u0;
  Field w0;
};

/// One forward and one adjoint solve on a mesh for `poly` (optionally
/// anchored to another polygon with the same vertex count).
MisfitEvaluation evaluate_misfit(const DomainSpec& dom, const Polygon& poly, const ConductivitySpec& k,
                                 const BoundaryData& f, const BoundarySamples& meas, const GradingSpec& grading,
                                 const Polygon* anchor = nullptr, bool with_gradient = true,
                                 const SolverOptions& solver = {});

}  // namespace polyeit
