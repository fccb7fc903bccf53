#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "polyeit/fem.hpp"
#include "polyeit/geometry.hpp"
#include "polyeit/mesh.hpp"
#include "polyeit/shapecalc.hpp"

namespace polyeit {

/// One Neumann excitation and the boundary voltages it produced.
struct Measurement {
  BoundaryData f;            // neumann, mean-zero
  BoundarySamples u_meas;    // possibly noisy
  std::vector<double> clean; // noise-free values at the same samples
  double noise_level = 0.0;  // requested noise rms relative to the clean rms
  double snr = 0.0;          // realised clean rms / noise rms (0 without noise)
};

struct OptimizerConfig {
  int max_iter = 200;
  double c1 = 1e-4;         // Armijo constant
  double backtrack = 0.5;   // step reduction per rejected trial
  /// First trial step; 0 picks one that moves a vertex by 2 % of the diameter.
  double initial_step = 0.0;
  int max_backtracks = 10;
  double grad_tol = 1e-10;  // stop when ||grad J|| falls below
  double j_tol = 1e-9;      // stop when an accepted step changes J by less than j_tol * J
  ConstraintParams constraints;
  /// Compare the adjoint gradient with a central FD of J every n iterates (0 disables).
  int fd_check_every = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double J = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  bool accepted = false;
  Polygon poly;
};

struct Trajectory {
  std::vector<IterationRecord> records;
  /// converged, stagnated, max_iter or stalled.
  std::string status;
  Polygon final_poly;
  double J_initial = 0.0;
  double J_final = 0.0;
  int iterations = 0;  // accepted steps
  std::vector<std::string> log;
};

/// Setting shared by every evaluation of J.
struct InverseProblem {
  DomainSpec domain = DomainSpec::unit_square();
  ConductivitySpec k;
  GradingSpec grading;
  SolverOptions solver;
};

/// J(poly) = sum over measurements of the boundary misfit, with its adjoint gradient.
struct MisfitSum {
  double J = 0.0;
  ShapeGradient gradient;
};

MisfitSum total_misfit(const InverseProblem& prob, const Polygon& poly, const std::vector<Measurement>& data,
                       bool with_gradient = true, const Polygon* anchor = nullptr);

/// Armijo-backtracked steepest descent on the vertex coordinates with
/// Barzilai-Borwein trial steps. Every iterate is remeshed and admissible.
Trajectory reconstruct(const InverseProblem& prob, const Polygon& initial, const std::vector<Measurement>& data,
                       const OptimizerConfig& cfg);

/// Noise-free or noisy data from a mesh refined by `mesh_scale`
/// (h, h_min and interface_h divided by it).
std::vector<Measurement> synthesize_data(const InverseProblem& prob, const Polygon& true_poly,
                                         const std::vector<BoundaryData>& excitations, double mesh_scale = 2.0,
                                         double noise_level = 0.0, std::uint64_t seed = 1);

/// Symmetric Hausdorff distance between the polygon boundaries.
double hausdorff_vertex_error(const Polygon& a, const Polygon& b);

/// CSV `iter,J,grad_norm,step,accepted,x1,y1,...`.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

}  // namespace polyeit
