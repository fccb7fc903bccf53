#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "polyeit/fem.hpp"
#include "polyeit/geometry.hpp"
#include "polyeit/mesh.hpp"

namespace polyeit {

/// Finite family of boundary functions used to represent operators.
struct BoundaryBasis {
  enum class Kind { trig, nodal, diamond };

  Kind kind = Kind::trig;
  int n_max = 8;
  std::vector<BoundaryData> elements;  // dirichlet-kind descriptors

  /// 1, cos t, sin t, ..., cos nt, sin nt; without the constant when mean_zero.
  static BoundaryBasis trig(int n_max = 8, bool mean_zero = false);
  /// Hat functions of every boundary node of m.
  static BoundaryBasis nodal(const Mesh& m);
  /// Mean-zero nodal functions e_i - (w_i / |boundary|) for all but the last
  /// boundary node; spans the whole discrete mean-zero space.
  static BoundaryBasis diamond(const Mesh& m);

  std::size_t size() const { return elements.size(); }
  bool mean_zero() const;
  /// Boundary values of each element (columns), loop order.
  Eigen::MatrixXd values(const Mesh& m) const;
  /// Lumped-mass Gram matrix.
  Eigen::MatrixXd gram(const Mesh& m) const;
};

struct OperatorMatrix {
  enum class Tag { dtn, ntd, dtn_derivative };

  Tag tag = Tag::dtn;
  Eigen::MatrixXd m;  // m(i, j) = <A b_j, b_i>
};

/// <Lambda b_j, b_i> from Dirichlet solves, one per basis element.
OperatorMatrix dtn_matrix(const MeshPtr& m, const std::vector<double>& sigma, const BoundaryBasis& basis,
                          const SolverOptions& opts = {});
OperatorMatrix dtn_matrix(const MeshPtr& m, const ConductivitySpec& k, const BoundaryBasis& basis,
                          const SolverOptions& opts = {});
/// <b_i, N b_j> from mean-zero Neumann solves; the basis must be mean-zero.
OperatorMatrix ntd_matrix(const MeshPtr& m, const ConductivitySpec& k, const BoundaryBasis& basis,
                          const SolverOptions& opts = {});

/// max |G^-1 N G^-1 L - I| for matched mean-zero bases.
double composition_defect(const OperatorMatrix& ntd, const OperatorMatrix& dtn, const Eigen::MatrixXd& gram);
/// max |M - M^T| / max |M|.
double symmetry_defect(const Eigen::MatrixXd& m);
/// Largest singular value of a symmetric positive operator by power iteration.
double power_iteration_norm(const Eigen::MatrixXd& a, double tol = 1e-6, int max_iter = 10000);
/// Smallest eigenvalue of a symmetric matrix by shifted power iteration.
double smallest_eigenvalue(const Eigen::MatrixXd& a, double tol = 1e-10);
/// Spectral norm of the operator whose pairing matrix is `pairing`, measured
/// in the lumped-mass norm of the basis span: || G^-1/2 P G^-1/2 ||_2.
double weighted_operator_norm(const Eigen::MatrixXd& pairing, const Eigen::MatrixXd& gram, double tol = 1e-6);

/// CSV `i,j,value`, row-major.
void write_operator_csv(std::ostream& os, const Eigen::MatrixXd& m);

/// Everything that determines F(P) or its Neumann analogue.
struct FunctionalSpec {
  enum class Pairing { dirichlet, neumann };

  DomainSpec domain = DomainSpec::unit_square();
  Polygon poly;
  ConductivitySpec k;
  BoundaryData f;
  BoundaryData g;
  GradingSpec grading;
  Pairing pairing = Pairing::dirichlet;
  /// Mesh anchor: the mesh is generated for this polygon and morphed onto `poly`.
  std::optional<Polygon> anchor;
  SolverOptions solver;

  std::string cache_key() const;
};

/// Mesh and solutions behind one evaluation of the functional. For the
/// Dirichlet pairing u, v solve the Dirichlet problem with data f, g; for
/// the Neumann pairing they solve the Neumann problem.
struct ForwardState {
  MeshPtr mesh;
  InterfaceRing ring;
  Field u;
  Field v;
  double value = 0.0;
};

ForwardState forward_state(const FunctionalSpec& spec);
MeshPtr mesh_for(const FunctionalSpec& spec);

/// G = <Lambda f, g> (Dirichlet) or <g, N f> (Neumann). Results are cached
/// by cache_key().
double functional_G(const FunctionalSpec& spec);
double functional_G(const DomainSpec& dom, const Polygon& poly, const ConductivitySpec& k, const BoundaryData& f,
                    const BoundaryData& g, const GradingSpec& grading);

void clear_functional_cache();

}  // namespace polyeit
