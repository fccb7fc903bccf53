#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "polyeit/shapecalc.hpp"
#include "polyeit/verify.hpp"

using namespace polyeit;
using K = BoundaryData::Kind;

namespace {

const Polygon kTri({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}});

GradingSpec coarse(double h = 0.1) {
  GradingSpec g = GradingSpec::with_defaults(h);
  g.h_min = h / 8.0;
  return g;
}

GradingSpec fine() {
  GradingSpec g = GradingSpec::with_defaults(0.05);
  g.interface_h = g.h / 16.0;
  return g;
}

VelocityField random_v(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> N(0.0, 1.0);
  VelocityField V = VelocityField::zero(n);
  for (std::size_t i = 0; i < n; ++i) V[i] = {N(rng), N(rng)};
  return V;
}

struct Traces {
  ForwardState st;
  std::vector<Vec2> ue, ve;
};

Traces traces(double k, const BoundaryData& f, const BoundaryData& g, const GradingSpec& gr = coarse()) {
  FunctionalSpec s;
  s.poly = kTri;
  s.k = {k};
  s.f = f;
  s.g = g;
  s.grading = gr;
  Traces t{forward_state(s), {}, {}};
  t.ue = recovered_trace(t.st.u, t.st.ring);
  t.ve = recovered_trace(t.st.v, t.st.ring);
  return t;
}

}  // namespace

TEST(ShapeCalc, ApplyM0) {
  EdgeFrame f;
  f.tangent = {1, 0};
  f.normal = {0, 1};
  const Vec2 r = apply_m0({3, 4}, f, 2.0);
  EXPECT_DOUBLE_EQ(r.x, 3.0);
  EXPECT_DOUBLE_EQ(r.y, 2.0);

  const auto e = edge_frame(kTri, 1);
  const Vec2 g{0.7, -1.3};
  const Vec2 id = apply_m0(g, e, 1.0);
  EXPECT_NEAR(id.x, g.x, 1e-15);
  EXPECT_NEAR(id.y, g.y, 1e-15);
  const Vec2 back = apply_m0(apply_m0(g, e, 3.5), e, 1.0 / 3.5);
  EXPECT_NEAR(back.x, g.x, 1e-14);
  EXPECT_NEAR(back.y, g.y, 1e-14);
}

TEST(ShapeCalc, TrivialZeros) {
  const auto t = traces(2.0, BoundaryData::coordinate_x(K::dirichlet), BoundaryData::coordinate_y(K::dirichlet));
  std::mt19937_64 rng(3);
  const auto V = random_v(rng, 3);
  EXPECT_EQ(shape_derivative(kTri, 1.0, t.st.ring, t.ue, t.ve, V), 0.0);
  EXPECT_EQ(shape_derivative(kTri, 2.0, t.st.ring, t.ue, t.ve, VelocityField::zero(3)), 0.0);
  for (const auto& g : per_vertex_gradient(kTri, 1.0, t.st.ring, t.ue, t.ve).g) {
    EXPECT_EQ(g.x, 0.0);
    EXPECT_EQ(g.y, 0.0);
  }
}

TEST(ShapeCalc, PerVertexMatchesEdgeForm) {
  const auto t = traces(2.0, BoundaryData::coordinate_x(K::dirichlet), BoundaryData::coordinate_y(K::dirichlet));
  const auto G = per_vertex_gradient(kTri, 2.0, t.st.ring, t.ue, t.ve);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10; ++i) {
    const auto V = random_v(rng, 3);
    const double d = shape_derivative(kTri, 2.0, t.st.ring, t.ue, t.ve, V);
    EXPECT_NEAR(G.pair(V), d, 1e-12 * std::max(1.0, std::abs(d)));
  }
}

// M0 grad v^e equals grad v^i in the limit; on a fine mesh the two forms agree.
TEST(ShapeCalc, MixedFormAgrees) {
  const auto t = traces(2.0, BoundaryData::coordinate_x(K::dirichlet), BoundaryData::coordinate_y(K::dirichlet),
                        fine());
  const auto vi = gradient_trace(t.st.v, t.st.ring, Side::interior);
  const VelocityField V({{0.3, -0.5}, {0.7, 0.2}, {-0.4, 0.6}});
  const double a = shape_derivative(kTri, 2.0, t.st.ring, t.ue, t.ve, V);
  const double b = shape_derivative_mixed(kTri, 2.0, t.st.ring, t.ue, vi, V);
  EXPECT_NEAR(a, b, 0.03 * std::abs(a));
}

TEST(ShapeCalc, SymmetricInUAndV) {
  const auto f = BoundaryData::cosine(K::dirichlet, 1);
  const auto t = traces(3.0, f, f);
  std::mt19937_64 rng(9);
  const auto V = random_v(rng, 3);
  const double a = shape_derivative(kTri, 3.0, t.st.ring, t.ue, t.ve, V);
  const double b = shape_derivative(kTri, 3.0, t.st.ring, t.ve, t.ue, V);
  EXPECT_NEAR(a, b, 1e-13 * std::abs(a));
}

// Finite-difference oracle on morphed meshes, k = 2, f = x, g = y.
TEST(ShapeCalc, DerivativeMatchesFiniteDifference) {
  FunctionalSpec s;
  s.poly = kTri;
  s.k = {2.0};
  s.f = BoundaryData::coordinate_x(K::dirichlet);
  s.g = BoundaryData::coordinate_y(K::dirichlet);
  s.grading = fine();
  const auto st = forward_state(s);
  const auto G = functional_gradient(s, st);
  const VelocityField V({{0.3, -0.5}, {0.7, 0.2}, {-0.4, 0.6}});
  const double d = G.pair(V);
  const auto fd = functional_fd(s, V);
  EXPECT_NEAR(d, fd.extrapolated, 0.02 * std::abs(fd.extrapolated));
}

TEST(ShapeCalc, GradientCsv) {
  ShapeGradient g;
  g.g = {{1.5, -2.0}, {0.0, 0.25}};
  std::ostringstream os;
  write_shape_gradient_csv(os, g);
  EXPECT_EQ(os.str(), "vertex_index,gx,gy\n0,1.5,-2\n1,0,0.25\n");
}

TEST(ShapeCalc, MisfitExactData) {
  const auto dom = DomainSpec::unit_square();
  const auto f = BoundaryData::cosine(K::neumann, 1);
  auto m = generate_mesh(dom, {kTri}, coarse());
  const auto u = solve_neumann(m, ConductivitySpec{2.0}, f);
  auto meas = BoundarySamples::from_field(u);
  EXPECT_LE(misfit(dom, kTri, ConductivitySpec{2.0}, f, meas, coarse()), 1e-20);
  for (auto& v : meas.values) v += 1.0;
  EXPECT_NEAR(misfit(dom, kTri, ConductivitySpec{2.0}, f, meas, coarse()), 0.5 * dom.perimeter(), 1e-9);
}

TEST(ShapeCalc, MisfitDecreasesTowardTruth) {
  const auto dom = DomainSpec::unit_square();
  const auto f = BoundaryData::cosine(K::neumann, 1);
  auto m = generate_mesh(dom, {kTri}, coarse(0.05));
  const auto meas = BoundarySamples::from_field(solve_neumann(m, ConductivitySpec{2.0}, f));
  const VelocityField V({{0.1, 0.05}, {-0.05, 0.1}, {0.08, -0.06}});
  double last = 1e300;
  for (double t : {1.0, 0.75, 0.5, 0.25, 0.0}) {
    const double J = misfit(dom, perturb(kTri, V, t), ConductivitySpec{2.0}, f, meas, coarse(0.05));
    EXPECT_LT(J, last) << "t " << t;
    last = J;
  }
}

TEST(ShapeCalc, AdjointState) {
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  const ConductivitySpec k{2.0};
  const auto u0 = solve_neumann(m, k, BoundaryData::cosine(K::neumann, 1));
  const auto zero = adjoint_state(m, k, u0, u0.trace());
  for (double v : zero.values) EXPECT_EQ(v, 0.0);

  std::vector<double> meas = u0.trace();
  for (std::size_t i = 0; i < meas.size(); ++i) meas[i] = 0.7 * meas[i] + 0.1 * std::sin(3.0 * i);
  const auto w = adjoint_state(m, k, u0, meas);

  // scaling the residual u0 - meas by c scales w0 by c
  Field u2 = u0;
  std::vector<double> meas2 = meas;
  for (auto& v : u2.values) v *= 3.0;
  for (std::size_t i = 0; i < meas2.size(); ++i) meas2[i] = 3.0 * meas[i];
  const auto w3 = adjoint_state(m, k, u2, meas2);
  double scale = 0.0;
  for (double v : w.values) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < w.values.size(); ++i) EXPECT_NEAR(w3.values[i], 3.0 * w.values[i], 1e-8 * scale);

  // a constant offset in the data is projected away
  std::vector<double> shifted = meas;
  for (auto& v : shifted) v += 0.4;
  const auto ws = adjoint_state(m, k, u0, shifted);
  for (std::size_t i = 0; i < w.values.size(); ++i) EXPECT_NEAR(ws.values[i], w.values[i], 1e-8 * scale);
}

TEST(ShapeCalc, MisfitGradientAtTruthIsSmall) {
  const auto dom = DomainSpec::unit_square();
  const auto f = BoundaryData::cosine(K::neumann, 1);
  auto m = generate_mesh(dom, {kTri}, coarse());
  const auto meas = BoundarySamples::from_field(solve_neumann(m, ConductivitySpec{2.0}, f));
  const auto at = evaluate_misfit(dom, kTri, ConductivitySpec{2.0}, f, meas, coarse());
  const Polygon off = perturb(kTri, VelocityField({{0.05, 0}, {0, 0.05}, {-0.05, 0}}), 1.0);
  const auto away = evaluate_misfit(dom, off, ConductivitySpec{2.0}, f, meas, coarse());
  EXPECT_LE(at.gradient.norm(), 1e-6 * away.gradient.norm());
  const auto unit = evaluate_misfit(dom, off, ConductivitySpec{1.0}, f, meas, coarse());
  EXPECT_EQ(unit.gradient.norm(), 0.0);
}

// Adjoint gradient against a central difference of J on morphed meshes.
TEST(ShapeCalc, MisfitGradientMatchesFiniteDifference) {
  const auto dom = DomainSpec::unit_square();
  const auto f = BoundaryData::cosine(K::neumann, 1);
  const Polygon truth = perturb(kTri, VelocityField({{0.04, -0.03}, {0.02, 0.05}, {-0.03, 0.02}}), 1.0);
  auto m = generate_mesh(dom, {truth}, fine());
  const auto meas = BoundarySamples::from_field(solve_neumann(m, ConductivitySpec{2.0}, f));
  const auto ev = evaluate_misfit(dom, kTri, ConductivitySpec{2.0}, f, meas, fine());
  const VelocityField D({{0.6, 0.2}, {-0.3, 0.5}, {0.1, -0.4}});
  const auto fd = central_fd([&](double t) {
    return evaluate_misfit(dom, perturb(kTri, D, t), ConductivitySpec{2.0}, f, meas, fine(), &kTri, false).J;
  });
  EXPECT_NEAR(ev.gradient.pair(D), fd.extrapolated, 0.02 * std::abs(fd.extrapolated));
}

TEST(ShapeCalc, SamplesInterpolate) {
  BoundarySamples s;
  s.arc = {0.0, 2.0, 4.0, 6.0};
  s.values = {0.0, 2.0, 4.0, 2.0};
  s.perimeter = 8.0;
  auto m = structured_square_mesh(2);
  const auto v = s.on(*m);
  const auto& loop = m->boundary();
  ASSERT_EQ(v.size(), loop.nodes.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = loop.arc[i];
    const double want = a <= 4.0 ? a : (a <= 6.0 ? 4.0 - (a - 4.0) : 2.0 - (a - 6.0));
    EXPECT_NEAR(v[i], want, 1e-14) << "arc " << a;
  }
}
