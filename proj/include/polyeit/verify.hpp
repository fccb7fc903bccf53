#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "polyeit/fem.hpp"
#include "polyeit/geometry.hpp"
#include "polyeit/maps.hpp"
#include "polyeit/mesh.hpp"

namespace polyeit {

/// Least-squares slope of log e against log t.
struct RateFit {
  std::vector<double> t;
  std::vector<double> e;
  std::vector<char> used;  // 1 when the sample entered the fit
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms of the log residuals
  std::size_t n_used = 0;
  double t_lo = 0.0, t_hi = 0.0;  // range of the samples used
  double floor = 0.0;
  /// Too few usable samples (e.g. e identically zero); slope is meaningless.
  bool degenerate = false;
  /// e decreases along decreasing t.
  bool monotone = true;
  std::vector<std::string> warnings;
};

/// Fits samples with e > 10 * floor. Needs at least 4 of them, otherwise the
/// result is flagged degenerate.
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& e, double floor = 0.0);

/// 1e-1, 5e-2, ... (8 values, ratio 1/2).
std::vector<double> default_t_list();

/// `t,value` rows followed by a `slope,residual,n_used` summary.
void write_rate_csv(std::ostream& os, const RateFit& fit);

/// Problem and mesh policy shared by the rate studies.
struct StudySetup {
  FunctionalSpec spec;  // poly, k, f, g, grading; pairing is set per study
  ConstraintParams constraints;
  /// Perturbed meshes are morphs of the reference mesh (fixed connectivity).
  /// Falls back to a fresh mesh when the morph fails.
  bool anchored = true;
  /// Estimate the discretisation floor from a second, slightly different
  /// mesh. Only used with fresh meshes; a morphed sequence carries no
  /// remeshing noise and its floor is the solver tolerance.
  bool estimate_floor = true;
};

/// |G(t) - G(0) - t G'(0)| for the Dirichlet pairing of f and g.
RateFit derivative_rate_study(const StudySetup& setup, const VelocityField& V, const std::vector<double>& t_list);
/// ||grad(u_t - u_0)||_{L2} for the Dirichlet problem with data f.
RateFit energy_rate_study(const StudySetup& setup, const VelocityField& V, const std::vector<double>& t_list);
/// ||u_t - u_0||_{L2(boundary)} for the Neumann problem with data f.
RateFit boundary_rate_study(const StudySetup& setup, const VelocityField& V, const std::vector<double>& t_list);
/// |T^t sym-diff T^0|; purely geometric.
RateFit area_rate_study(const Polygon& poly, const VelocityField& V, const std::vector<double>& t_list);

struct OperatorStudy {
  RateFit fit;
  Eigen::MatrixXd derivative;  // pairing matrix of the operator derivative
  double symmetry = 0.0;       // symmetry_defect of `derivative`
};

/// || Lambda_t - Lambda_0 - t L ||, measured as weighted_operator_norm on a
/// fixed mean-zero trig basis.
OperatorStudy operator_derivative_check(const StudySetup& setup, const VelocityField& V,
                                        const std::vector<double>& t_list, int n_max = 4);

/// Pairing matrix of the operator derivative on a basis, from Dirichlet
/// solutions on a mesh conforming to poly.
Eigen::MatrixXd dtn_derivative_matrix(const MeshPtr& m, const Polygon& poly, const ConductivitySpec& k,
                                      const BoundaryBasis& basis, const VelocityField& V,
                                      const SolverOptions& opts = {});

struct SingularityFit {
  std::size_t vertex = 0;
  std::vector<double> radii;     // decreasing
  std::vector<double> grad_max;  // per annulus [radii[j+1], radii[j])
  std::vector<int> elements;     // triangles per annulus
  std::vector<double> r_at_max;  // centroid distance of the maximising triangle
  double omega = 0.0;
  double slope = 0.0;
  double residual = 0.0;
};

/// 6 radii, ratio 0.6, outermost a quarter of the shorter edge at the vertex.
std::vector<double> default_annuli(const Polygon& poly, std::size_t vertex);

/// Fits max |grad u| over annuli around a polygon vertex against the
/// distance of the maximising triangle; omega = 1 + slope. Every annulus needs 20 triangles.
SingularityFit singularity_study(const Field& u, const Polygon& poly, std::size_t vertex,
                                 std::vector<double> radii = {});

/// int (sigma_t - sigma_0) grad u_t . grad v_0 over a mesh conforming to both
/// polygons. u_t carries sigma_t; the region of each triangle is recomputed
/// for both polygons.
double alessandrini_increment(const Field& u_t, const Field& v_0, const Polygon& p0, const Polygon& pt, double k);

struct AlessandriniCheck {
  double increment = 0.0;
  double pairing_difference = 0.0;  // G_t - G_0 on the shared mesh
  double relative_gap = 0.0;
  std::size_t triangles = 0;
};

/// Meshes both polygons together, solves u_t, u_0 (data f) and v_0 (data g)
/// and compares the volume increment with the pairing difference.
AlessandriniCheck alessandrini_check(const FunctionalSpec& spec, const VelocityField& V, double t);

/// Central differences (G(t) - G(-t)) / 2t and their Richardson limit in t^2.
struct FdEstimate {
  std::vector<double> t;
  std::vector<double> central;
  double raw = 0.0;           // smallest-t central difference
  double extrapolated = 0.0;  // polynomial extrapolation to t = 0
};

FdEstimate central_fd(const std::function<double(double)>& G, const std::vector<double>& ts = {4e-3, 2e-3, 1e-3});

/// FD oracle for functional_G along V. With `anchored`, perturbed meshes are
/// morphs of the mesh for spec.poly.
FdEstimate functional_fd(const FunctionalSpec& spec, const VelocityField& V, bool anchored = true,
                         const std::vector<double>& ts = {4e-3, 2e-3, 1e-3});

struct PairingConsistency {
  double dirichlet = 0.0;      // G'(0) of <Lambda f, g>, boundary formula
  double neumann = 0.0;        // d/dt <g_N, N_t f_N>, boundary formula
  double neumann_fd = 0.0;     // same, Richardson FD
  double relative_gap = 0.0;   // |neumann_fd + dirichlet| / |dirichlet|
};

/// Neumann data f_N = Lambda_h f, g_N = Lambda_h g taken from the discrete
/// Dirichlet solutions, so that both sides see the same fields at t = 0.
PairingConsistency pairing_consistency(const FunctionalSpec& spec, const VelocityField& V);

}  // namespace polyeit
