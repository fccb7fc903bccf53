#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "polyeit/mesh.hpp"

namespace polyeit {

/// Contrast k of sigma = 1 + (k - 1) chi_T.
struct ConductivitySpec {
  double k = 2.0;

  /// k > 0 always; k != 1 unless `allow_unit`.
  void validate(bool allow_unit = true) const;
  double sigma(Region r) const { return r == Region::inside ? k : 1.0; }
};

/// Per-triangle conductivity from the mesh labels, or from `regions` when given.
std::vector<double> element_sigma(const Mesh& m, const ConductivitySpec& k,
                                  const std::vector<Region>* regions = nullptr);

/// Boundary data on the outer boundary. Trig modes use the arc-length angle
/// theta = 2 pi s / perimeter measured from the first domain corner.
struct BoundaryData {
  enum class Kind { dirichlet, neumann };
  enum class Mode { cosine, sine, coord_x, coord_y, nodal, function };

  Kind kind = Kind::dirichlet;
  Mode mode = Mode::cosine;
  int index = 0;                           // trig index n
  std::vector<double> values;              // nodal values in boundary-loop order
  std::function<double(const Vec2&)> fn;   // analytic function of position

  static BoundaryData cosine(Kind kind, int n);
  static BoundaryData sine(Kind kind, int n);
  static BoundaryData coordinate_x(Kind kind);
  static BoundaryData coordinate_y(Kind kind);
  static BoundaryData nodal(Kind kind, std::vector<double> values);
  static BoundaryData function(Kind kind, std::function<double(const Vec2&)> fn);

  /// Same data with another kind.
  BoundaryData as(Kind k) const;
  /// Values at the boundary nodes of m, in loop order. Neumann analytic data
  /// is projected onto the discrete mean-zero subspace; Neumann nodal data
  /// must already be compatible.
  std::vector<double> boundary_values(const Mesh& m) const;
  std::string describe() const;
};

/// Compressed sparse row matrix.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  void multiply(const std::vector<double>& x, std::vector<double>& y) const;
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> diagonal() const;
};

struct LinearSystem {
  CsrMatrix A;
  std::vector<double> rhs;
  std::vector<int> constrained;  // Dirichlet-eliminated nodes, empty for Neumann
};

/// Stiffness matrix sum_T sigma_T int grad phi_i . grad phi_j, without
/// boundary conditions; zero right-hand side.
LinearSystem assemble(const Mesh& m, const std::vector<double>& sigma);
LinearSystem assemble(const Mesh& m, const ConductivitySpec& k);

struct SolverOptions {
  double rtol = 1e-10;
  double cap_factor = 50.0;  // iteration cap = cap_factor * sqrt(unknowns)
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // final relative residual
  bool max_principle_ok = true;
};

/// Jacobi-preconditioned conjugate gradients. Throws SolverError (with the
/// tail of the residual history) when the cap is reached.
SolveStats conjugate_gradient(const CsrMatrix& A, const std::vector<double>& b, std::vector<double>& x,
                              const SolverOptions& opts = {});

/// P1 nodal solution.
struct Field {
  MeshPtr mesh;
  std::vector<double> values;
  std::vector<double> sigma;  // per triangle
  double k = 1.0;
  std::string tag;
  SolveStats stats;

  Vec2 gradient(std::size_t t) const;
  /// Values at the boundary nodes in loop order.
  std::vector<double> trace() const;
  /// Lumped boundary integral of u.
  double boundary_integral() const;
};

Field solve_dirichlet(const MeshPtr& m, const ConductivitySpec& k, const BoundaryData& f,
                      const SolverOptions& opts = {});
Field solve_dirichlet(const MeshPtr& m, const std::vector<double>& sigma, const BoundaryData& f,
                      const SolverOptions& opts = {});
/// Mean-zero Neumann solution, normalised by sum_i w_i u_i = 0 over boundary nodes.
Field solve_neumann(const MeshPtr& m, const ConductivitySpec& k, const BoundaryData& g,
                    const SolverOptions& opts = {});
Field solve_neumann(const MeshPtr& m, const std::vector<double>& sigma, const BoundaryData& g,
                    const SolverOptions& opts = {});

enum class Side { interior, exterior };

/// Constant gradient of u on the triangle adjacent to each ring edge.
std::vector<Vec2> gradient_trace(const Field& u, const InterfaceRing& ring, Side side);

/// Exterior gradient on each ring edge with its normal part replaced by the
/// flux sigma dn u recovered from the weak residual at the ring nodes
/// (lumped). Converges faster than either one-sided gradient.
std::vector<Vec2> recovered_trace(const Field& u, const InterfaceRing& ring);

enum class Extension { zero_interior, discrete_harmonic };

/// <Lambda f, g> = int sigma grad u_f . grad E g for a P1 extension E g.
double boundary_pairing(const Field& u, const BoundaryData& g, Extension ext = Extension::zero_interior);
/// Discrete normal flux density of u at the boundary nodes (loop order):
/// the boundary rows of A u divided by the lumped weights.
std::vector<double> boundary_flux(const Field& u);
/// Lumped boundary inner product of two loop-ordered value vectors.
double boundary_inner(const Mesh& m, const std::vector<double>& a, const std::vector<double>& b);

/// int sigma |grad u|^2.
double energy(const Field& u);

/// || grad u - grad v ||_{L2}, exact on the overlay of the two meshes.
double h1_seminorm_diff(const Field& u, const Field& v);
/// || u - v ||_{L2(boundary)} by trapezoid rule on the merged boundary nodes.
double boundary_l2_diff(const Field& u, const Field& v);

/// Boundary trace of u sampled at the boundary nodes of `target` (by arc length).
std::vector<double> sample_trace(const Field& u, const Mesh& target);

/// `FIELD n` followed by `node value` lines.
void write_field(std::ostream& os, const Field& u);

}  // namespace polyeit
