#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/maps.hpp"

using namespace polyeit;
using K = BoundaryData::Kind;

namespace {

const Polygon kTri({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}});

GradingSpec coarse(double h = 0.1) {
  GradingSpec g = GradingSpec::with_defaults(h);
  g.h_min = h / 8.0;
  return g;
}

MeshPtr disk() {
  static MeshPtr m = [] {
    GradingSpec g{0.04, 0.04, 2.0, 0.2, 0.0};
    return generate_mesh(DomainSpec::regular_ngon(256), {}, g);
  }();
  return m;
}

MeshPtr square_with_tri() {
  static MeshPtr m = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  return m;
}

}  // namespace

TEST(Maps, DiskDtnEigenvalues) {
  const auto basis = BoundaryBasis::trig(4);
  const auto L = dtn_matrix(disk(), ConductivitySpec{1.0}, basis);
  ASSERT_EQ(L.m.rows(), 9);
  const double scale = 4.0 * std::numbers::pi;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const int n = (i + 1) / 2;
      const double want = (i == j && i > 0) ? n * std::numbers::pi : 0.0;
      EXPECT_NEAR(L.m(i, j), want, 0.02 * scale) << i << "," << j;
    }
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(L.m(2 * n, 2 * n), n * std::numbers::pi, 0.02 * n * std::numbers::pi);
}

TEST(Maps, DtnSymmetryAndKernel) {
  const auto L = dtn_matrix(square_with_tri(), ConductivitySpec{2.0}, BoundaryBasis::trig(4));
  EXPECT_LE(symmetry_defect(L.m), 1e-8);
  const double scale = L.m.cwiseAbs().maxCoeff();
  EXPECT_LE(L.m.row(0).cwiseAbs().maxCoeff(), 1e-8 * scale);
  EXPECT_LE(L.m.col(0).cwiseAbs().maxCoeff(), 1e-8 * scale);
}

TEST(Maps, ApproachesUnitConductivity) {
  const auto basis = BoundaryBasis::trig(3);
  const auto L1 = dtn_matrix(square_with_tri(), ConductivitySpec{1.0}, basis);
  double last = 1e300;
  for (double k : {2.0, 1.5, 1.1}) {
    const auto Lk = dtn_matrix(square_with_tri(), ConductivitySpec{k}, basis);
    const double d = (Lk.m - L1.m).norm();
    EXPECT_LT(d, last) << "k " << k;
    last = d;
  }
}

TEST(Maps, MonotoneInSigma) {
  const auto f = BoundaryData::cosine(K::dirichlet, 1);
  const auto a = boundary_pairing(solve_dirichlet(square_with_tri(), ConductivitySpec{3.0}, f), f);
  const auto b = boundary_pairing(solve_dirichlet(square_with_tri(), ConductivitySpec{1.0}, f), f);
  EXPECT_GE(a, b - 1e-8);
}

TEST(Maps, DiskNtdEigenvalues) {
  const auto N = ntd_matrix(disk(), ConductivitySpec{1.0}, BoundaryBasis::trig(4, true));
  ASSERT_EQ(N.m.rows(), 8);
  for (int n = 1; n <= 4; ++n) {
    EXPECT_NEAR(N.m(2 * n - 2, 2 * n - 2), std::numbers::pi / n, 0.02 * std::numbers::pi / n);
    EXPECT_NEAR(N.m(2 * n - 1, 2 * n - 1), std::numbers::pi / n, 0.02 * std::numbers::pi / n);
  }
  EXPECT_LE(symmetry_defect(N.m), 1e-8);
}

TEST(Maps, NtdNeedsMeanZeroBasis) {
  EXPECT_THROW(ntd_matrix(square_with_tri(), ConductivitySpec{2.0}, BoundaryBasis::trig(2)), ValidationError);
}

// On the full discrete mean-zero space the Galerkin NtD inverts the DtN.
TEST(Maps, CompositionOnMeanZeroSpace) {
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, GradingSpec{0.25, 0.1, 2.0, 0.2, 0.0});
  const auto basis = BoundaryBasis::diamond(*m);
  ASSERT_TRUE(basis.mean_zero());
  SolverOptions o;
  o.rtol = 1e-13;
  const auto L = dtn_matrix(m, ConductivitySpec{2.0}, basis, o);
  const auto N = ntd_matrix(m, ConductivitySpec{2.0}, basis, o);
  const Eigen::MatrixXd G = basis.gram(*m);
  EXPECT_LE(composition_defect(N, L, G), 1e-6);
  EXPECT_LE(symmetry_defect(N.m), 1e-8);
  EXPECT_GT(smallest_eigenvalue(N.m), 0.0);
}

TEST(Maps, OperatorNorms) {
  Eigen::MatrixXd a(2, 2);
  a << 3.0, 1.0, 1.0, 3.0;
  EXPECT_NEAR(power_iteration_norm(a, 1e-12), 4.0, 1e-9);
  EXPECT_NEAR(smallest_eigenvalue(a), 2.0, 1e-8);
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2) * 4.0;
  EXPECT_NEAR(weighted_operator_norm(a, g, 1e-12), 1.0, 1e-9);
}

TEST(Maps, OperatorCsv) {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  std::ostringstream os;
  write_operator_csv(os, a);
  EXPECT_EQ(os.str(), "i,j,value\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
}

TEST(Maps, FunctionalUnitContrastIgnoresPolygon) {
  const auto f = BoundaryData::coordinate_x(K::dirichlet);
  const auto g = BoundaryData::cosine(K::dirichlet, 1);
  auto plain = generate_mesh(DomainSpec::unit_square(), {}, coarse());
  const double ref = boundary_pairing(solve_dirichlet(plain, ConductivitySpec{1.0}, f), g);
  const Polygon other({{-0.5, 0.1}, {0.2, 0.0}, {-0.1, 0.6}});
  for (const Polygon& p : {kTri, other}) {
    const double G = functional_G(DomainSpec::unit_square(), p, ConductivitySpec{1.0}, f, g, coarse());
    EXPECT_NEAR(G, ref, 2e-3 * std::abs(ref));
  }
}

TEST(Maps, FunctionalRelabelInvariant) {
  const auto f = BoundaryData::coordinate_x(K::dirichlet);
  const auto g = BoundaryData::coordinate_y(K::dirichlet);
  const double a = functional_G(DomainSpec::unit_square(), kTri, ConductivitySpec{2.0}, f, g, coarse());
  const double b = functional_G(DomainSpec::unit_square(), kTri.relabeled(1), ConductivitySpec{2.0}, f, g, coarse());
  EXPECT_NEAR(a, b, 1e-9 * std::abs(a));
}

TEST(Maps, FunctionalContinuousInT) {
  FunctionalSpec s;
  s.poly = kTri;
  s.k = {2.0};
  s.f = BoundaryData::coordinate_x(K::dirichlet);
  s.g = BoundaryData::coordinate_x(K::dirichlet);
  s.grading = coarse();
  const VelocityField V({{0.18, -0.3}, {0.42, 0.12}, {-0.24, 0.36}});
  const double G0 = functional_G(s);
  std::vector<double> lt, le;
  for (double t : {0.08, 0.04, 0.02, 0.01}) {
    FunctionalSpec a = s;
    a.poly = perturb(kTri, V, t);
    a.anchor = kTri;
    lt.push_back(std::log(t));
    le.push_back(std::log(std::abs(functional_G(a) - G0)));
  }
  const double slope = (le.back() - le.front()) / (lt.back() - lt.front());
  EXPECT_NEAR(slope, 1.0, 0.15);
}

TEST(Maps, FunctionalCacheKeySeparatesInputs) {
  FunctionalSpec a;
  a.poly = kTri;
  a.f = BoundaryData::cosine(K::dirichlet, 1);
  a.g = BoundaryData::cosine(K::dirichlet, 1);
  FunctionalSpec b = a;
  b.k = {3.0};
  FunctionalSpec c = a;
  c.g = BoundaryData::sine(K::dirichlet, 1);
  EXPECT_NE(a.cache_key(), b.cache_key());
  EXPECT_NE(a.cache_key(), c.cache_key());
  EXPECT_EQ(a.cache_key(), FunctionalSpec(a).cache_key());
}
