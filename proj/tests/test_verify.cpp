#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/verify.hpp"

using namespace polyeit;
using K = BoundaryData::Kind;

namespace {

const Polygon kTri({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}});
const VelocityField kV = VelocityField({{0.3, -0.5}, {0.7, 0.2}, {-0.4, 0.6}}).scaled(0.6);

GradingSpec coarse(double h = 0.1) {
  GradingSpec g = GradingSpec::with_defaults(h);
  g.h_min = h / 8.0;
  return g;
}

StudySetup setup(double k) {
  StudySetup s;
  s.spec.poly = kTri;
  s.spec.k = {k};
  s.spec.f = BoundaryData::coordinate_x(K::dirichlet);
  s.spec.g = BoundaryData::coordinate_y(K::dirichlet);
  s.spec.grading = coarse();
  return s;
}

Polygon sixty_degree_triangle() {
  return Polygon({{-0.3, -0.2}, {0.3, -0.2}, {0.0, -0.2 + 0.6 * std::sqrt(3.0) / 2.0}});
}

}  // namespace

TEST(Verify, FitExactPowerLaws) {
  const auto t = default_t_list();
  ASSERT_EQ(t.size(), 8u);
  EXPECT_DOUBLE_EQ(t.front(), 0.1);
  EXPECT_DOUBLE_EQ(t.back(), 0.1 / 128.0);
  for (double p : {2.0, 1.3}) {
    std::vector<double> e;
    for (double x : t) e.push_back(3.7 * std::pow(x, p));
    const auto r = fit_rate(t, e);
    EXPECT_NEAR(r.slope, p, 1e-6);
    EXPECT_NEAR(std::exp(r.intercept), 3.7, 1e-6);
    EXPECT_EQ(r.n_used, 8u);
    EXPECT_TRUE(r.monotone);
    EXPECT_FALSE(r.degenerate);
  }
}

TEST(Verify, FitFloorAndDegenerate) {
  const auto t = default_t_list();
  std::vector<double> e;
  for (double x : t) e.push_back(x * x);
  const auto r = fit_rate(t, e, 2e-5);  // keeps e > 2e-4
  EXPECT_EQ(r.n_used, 3u);
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(std::isnan(r.slope));

  const auto z = fit_rate(t, std::vector<double>(t.size(), 0.0));
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(z.n_used, 0u);

  std::vector<double> bumpy = e;
  bumpy[5] = bumpy[3];
  EXPECT_FALSE(fit_rate(t, bumpy).monotone);
  EXPECT_THROW(fit_rate({0.1, 0.0}, {1.0, 1.0}), ValidationError);
}

TEST(Verify, RateCsv) {
  const std::vector<double> t{0.4, 0.2, 0.1, 0.05};
  std::vector<double> e;
  for (double x : t) e.push_back(x * x);
  std::ostringstream os;
  write_rate_csv(os, fit_rate(t, e));
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("t,value\n0.40000000000000002,0.16000000000000003\n", 0), 0u) << s;
  EXPECT_NE(s.find("slope,residual,n_used\n2,"), std::string::npos) << s;

  std::ostringstream z;
  write_rate_csv(z, fit_rate(t, std::vector<double>(4, 0.0)));
  EXPECT_NE(z.str().find("nan,nan,0"), std::string::npos) << z.str();
}

TEST(Verify, AreaRate) {
  const auto r = area_rate_study(kTri, kV, default_t_list());
  EXPECT_NEAR(r.slope, 1.0, 0.05);
}

TEST(Verify, UnitContrastIsDegenerate) {
  const auto s = setup(1.0);
  const auto d = derivative_rate_study(s, kV, default_t_list());
  EXPECT_TRUE(d.degenerate);
  for (double e : d.e) EXPECT_EQ(e, 0.0);
  StudySetup b = s;
  b.spec.f = BoundaryData::cosine(K::neumann, 1);
  const auto r = boundary_rate_study(b, kV, default_t_list());
  EXPECT_TRUE(r.degenerate);
  for (double e : r.e) EXPECT_LE(e, 10.0 * r.floor);
}

TEST(Verify, StudiesRejectNonPositiveT) {
  EXPECT_THROW(energy_rate_study(setup(2.0), kV, {0.1, 0.0}), ValidationError);
  EXPECT_THROW(derivative_rate_study(setup(2.0), VelocityField::zero(4), {0.1}), ValidationError);
}

TEST(Verify, InadmissibleTIsSkipped) {
  // t = 0.5 moves a vertex by more than d0 / 2
  const auto r = derivative_rate_study(setup(2.0), kV, {0.5, 0.1, 0.05, 0.025, 0.0125});
  EXPECT_EQ(r.t.size(), 4u);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("admissible"), std::string::npos) << r.warnings.front();
}

TEST(Verify, OperatorDerivativeStructure) {
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  const auto basis = BoundaryBasis::trig(3, true);
  const auto L = dtn_derivative_matrix(m, kTri, ConductivitySpec{2.0}, basis, kV);
  EXPECT_LE(symmetry_defect(L), 1e-8);
  EXPECT_GT(L.cwiseAbs().maxCoeff(), 0.0);
  const auto L1 = dtn_derivative_matrix(m, kTri, ConductivitySpec{1.0}, basis, kV);
  EXPECT_EQ(L1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Verify, SingularityManufactured) {
  const Polygon p = sixty_degree_triangle();
  auto m = generate_mesh(DomainSpec::unit_square(), {p}, GradingSpec::with_defaults(0.05));
  Field w;
  w.mesh = m;
  w.sigma.assign(m->triangle_count(), 1.0);
  for (const auto& x : m->nodes()) {
    const Vec2 d = x - p[0];
    w.values.push_back(std::pow(norm(d), 0.7) * std::cos(0.7 * std::atan2(d.y, d.x)));
  }
  const auto f = singularity_study(w, p, 0);
  EXPECT_NEAR(f.omega, 0.7, 0.05);
  EXPECT_EQ(f.radii.size(), 6u);
  for (int n : f.elements) EXPECT_GE(n, 20);
}

TEST(Verify, SingularitySmoothAndInclusion) {
  const Polygon p = sixty_degree_triangle();
  auto m = generate_mesh(DomainSpec::unit_square(), {p}, GradingSpec::with_defaults(0.05));
  const auto f = BoundaryData::coordinate_x(K::dirichlet);
  const auto smooth = singularity_study(solve_dirichlet(m, ConductivitySpec{1.0}, f), p, 0);
  EXPECT_GE(smooth.omega, 0.9);
  EXPECT_LE(smooth.omega, 1.1);
  const auto sharp = singularity_study(solve_dirichlet(m, ConductivitySpec{5.0}, f), p, 0);
  EXPECT_GT(sharp.omega, 0.5);
  EXPECT_LT(sharp.omega, 1.0);
}

TEST(Verify, SingularityNeedsResolution) {
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, GradingSpec{0.1, 0.1, 2.0, 0.2, 0.0});
  const auto u = solve_dirichlet(m, ConductivitySpec{5.0}, BoundaryData::coordinate_x(K::dirichlet));
  try {
    singularity_study(u, kTri, 0);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("h_min"), std::string::npos) << e.what();
  }
}

TEST(Verify, Alessandrini) {
  FunctionalSpec s = setup(2.0).spec;
  const auto zero = alessandrini_check(s, kV, 0.0);
  EXPECT_EQ(zero.increment, 0.0);
  EXPECT_EQ(zero.pairing_difference, 0.0);

  const auto c = alessandrini_check(s, kV, 0.05);
  EXPECT_GT(c.triangles, 0u);
  EXPECT_NE(c.increment, 0.0);
  EXPECT_LE(c.relative_gap, 1e-6);

  s.k = {1.0};
  const auto one = alessandrini_check(s, kV, 0.05);
  EXPECT_EQ(one.increment, 0.0);
}

TEST(Verify, CentralFdExtrapolates) {
  const auto fd = central_fd([](double t) { return std::sin(2.0 * t) + t * t * t * t; });
  EXPECT_EQ(fd.t.size(), 3u);
  EXPECT_NEAR(fd.raw, 2.0, 1e-5);
  EXPECT_NEAR(fd.extrapolated, 2.0, 1e-11);
  EXPECT_THROW(central_fd([](double t) { return t; }, {}), ValidationError);
}

TEST(Verify, PairingConsistencyImprovesWithGrading) {
  FunctionalSpec s = setup(2.0).spec;
  const auto a = pairing_consistency(s, kV);
  s.grading = GradingSpec::with_defaults(0.1);
  s.grading.interface_h = 0.1 / 16.0;
  const auto b = pairing_consistency(s, kV);
  EXPECT_GT(std::abs(a.dirichlet), 0.0);
  EXPECT_LT(b.relative_gap, a.relative_gap);
  EXPECT_LT(b.relative_gap, 0.1);
  // the Neumann pairing moves against the Dirichlet one
  EXPECT_LT(a.neumann * a.dirichlet, 0.0);
  EXPECT_LT(b.neumann_fd * b.dirichlet, 0.0);
}
