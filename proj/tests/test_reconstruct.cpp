#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/reconstruct.hpp"

using namespace polyeit;
using K = BoundaryData::Kind;

namespace {

const Polygon kTruth({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}});

InverseProblem coarse_problem() {
  InverseProblem p;
  p.k = {2.0};
  p.grading = GradingSpec::with_defaults(0.1);
  p.grading.h_min = 0.1 / 8.0;
  return p;
}

std::vector<BoundaryData> excitations() {
  return {BoundaryData::cosine(K::neumann, 1), BoundaryData::sine(K::neumann, 1), BoundaryData::cosine(K::neumann, 2)};
}

Polygon offset_start() {
  const double d = 0.05 * kTruth.diameter();
  const double ang[3] = {0.3, 2.5, 4.4};
  std::vector<Vec2> v;
  for (int i = 0; i < 3; ++i) v.push_back(kTruth[i] + d * Vec2{std::cos(ang[i]), std::sin(ang[i])});
  return Polygon(v);
}

}  // namespace

TEST(Reconstruct, StartAtTruthStopsImmediately) {
  const auto prob = coarse_problem();
  const auto data = synthesize_data(prob, kTruth, excitations(), 1.0);
  const auto tr = reconstruct(prob, kTruth, data, OptimizerConfig{});
  EXPECT_LE(tr.iterations, 1);
  EXPECT_LE(tr.J_final, 1e-20);
  EXPECT_EQ(tr.status, "converged");
}

TEST(Reconstruct, AcceptedStepsDecrease) {
  const auto prob = coarse_problem();
  const auto data = synthesize_data(prob, kTruth, excitations(), 2.0);
  OptimizerConfig cfg;
  cfg.max_iter = 6;
  cfg.fd_check_every = 3;
  const auto tr = reconstruct(prob, offset_start(), data, cfg);
  double last = tr.J_initial;
  int accepted = 0;
  for (const auto& r : tr.records) {
    if (!r.accepted || r.iter == 0) continue;
    EXPECT_LT(r.J, last) << "iter " << r.iter;
    last = r.J;
    ++accepted;
  }
  EXPECT_EQ(accepted, tr.iterations);
  EXPECT_GT(accepted, 0);
  EXPECT_LT(tr.J_final, tr.J_initial);
  EXPECT_LT(hausdorff_vertex_error(tr.final_poly, kTruth), hausdorff_vertex_error(offset_start(), kTruth));
  EXPECT_FALSE(tr.log.empty());

  std::ostringstream os;
  write_trajectory_csv(os, tr);
  EXPECT_EQ(os.str().rfind("iter,J,grad_norm,step,accepted,x1,y1,x2,y2,x3,y3\n", 0), 0u);
}

TEST(Reconstruct, NoiseStatistics) {
  InverseProblem prob;
  prob.k = {2.0};
  prob.grading = GradingSpec{0.02, 0.02, 2.0, 0.2, 0.0};
  const double level = 0.01;
  const auto a = synthesize_data(prob, kTruth, excitations(), 1.0, level, 1);
  const auto b = synthesize_data(prob, kTruth, excitations(), 1.0, level, 2);
  double c2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].snr, 1.0 / level, 0.1 / level);
    EXPECT_EQ(a[i].clean, b[i].clean);
    EXPECT_NE(a[i].u_meas.values, b[i].u_meas.values);
    double ci = 0.0;
    for (double v : a[i].clean) ci += v * v;
    c2 += ci;
    n2 += ci / (a[i].snr * a[i].snr);
  }
  EXPECT_NEAR(std::sqrt(c2 / n2), 1.0 / level, 0.05 / level);

  const auto again = synthesize_data(prob, kTruth, excitations(), 1.0, level, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].u_meas.values, again[i].u_meas.values);
}

TEST(Reconstruct, HausdorffDilatedSquare) {
  const double s = 0.4, eps = 0.1;
  const Polygon a({{-s, -s}, {-s, s}, {s, s}, {s, -s}});
  const double S = s * (1 + eps);
  const Polygon b({{-S, -S}, {-S, S}, {S, S}, {S, -S}});
  EXPECT_EQ(hausdorff_vertex_error(a, a), 0.0);
  EXPECT_NEAR(hausdorff_vertex_error(a, b), eps * s * std::sqrt(2.0), 1e-14);
}

// 10^4 boundary samples of each polygon against the exact value.
TEST(Reconstruct, HausdorffDenseOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  for (int c = 0; c < 3; ++c) {
    const Polygon a({{U(rng), U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)}});
    const Polygon b({{U(rng), U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)}, });
    auto directed = [](const Polygon& p, const Polygon& q) {
      const int n = 10000;
      double best = 0.0, per = p.perimeter();
      std::size_t e = 0;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double s = per * i / n;
        while (acc + p.edge_length(e) < s) acc += p.edge_length(e++);
        const double u = (s - acc) / p.edge_length(e);
        best = std::max(best, q.boundary_distance(p.vertex(e) + u * (p.vertex(e + 1) - p.vertex(e))));
      }
      return best;
    };
    const double oracle = std::max(directed(a, b), directed(b, a));
    EXPECT_NEAR(hausdorff_vertex_error(a, b), oracle, 0.01 * oracle) << "case " << c;
    EXPECT_GE(hausdorff_vertex_error(a, b), oracle - 1e-15);
  }
}

TEST(Reconstruct, ConfigValidation) {
  OptimizerConfig c;
  c.c1 = 1.5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.backtrack = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.max_backtracks = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(OptimizerConfig{}.validate());
}

TEST(Reconstruct, RejectsBadInputs) {
  const auto prob = coarse_problem();
  const auto data = synthesize_data(prob, kTruth, {BoundaryData::cosine(K::neumann, 1)}, 1.0);
  const Polygon near_wall({{0.95, 0.0}, {0.5, -0.3}, {0.5, 0.3}});
  EXPECT_THROW(reconstruct(prob, near_wall, data, OptimizerConfig{}), GeometryError);
  EXPECT_THROW(synthesize_data(prob, kTruth, excitations(), 0.5), ValidationError);
  EXPECT_THROW(total_misfit(prob, kTruth, {}), ValidationError);
  InverseProblem unit = prob;
  unit.k = {1.0};
  EXPECT_THROW(reconstruct(unit, kTruth, data, OptimizerConfig{}), ValidationError);
}

TEST(Reconstruct, MisfitSumsMeasurements) {
  const auto prob = coarse_problem();
  const auto data = synthesize_data(prob, kTruth, excitations(), 2.0);
  const auto all = total_misfit(prob, offset_start(), data);
  double J = 0.0;
  for (const auto& m : data) J += total_misfit(prob, offset_start(), {m}, false).J;
  EXPECT_NEAR(all.J, J, 1e-14 * J);
  EXPECT_EQ(all.gradient.size(), 3u);
}
