#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "polyeit/errors.hpp"
#include "polyeit/geometry.hpp"

using namespace polyeit;

namespace {

Polygon equilateral(double side, Vec2 c = {0.0, 0.0}) {
  const double r = side / std::sqrt(3.0);
  std::vector<Vec2> v;
  for (int i = 0; i < 3; ++i) {
    const double a = 1.5707963267948966 - 2.0943951023931957 * i;  // clockwise
    v.push_back(c + r * Vec2{std::cos(a), std::sin(a)});
  }
  return Polygon(v);
}

const ConstraintCheck& check(const AdmissibilityReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c;
  throw std::runtime_error("no check " + name);
}

}  // namespace

TEST(Geometry, StoredClockwise) {
  Polygon ccw({{0, 0}, {1, 0}, {0, 1}});
  EXPECT_TRUE(ccw.was_reversed());
  EXPECT_LT(ccw.signed_area(), 0.0);
  EXPECT_NEAR(ccw.area(), 0.5, 1e-15);
  Polygon cw({{0, 0}, {0, 1}, {1, 0}});
  EXPECT_FALSE(cw.was_reversed());
}

TEST(Geometry, EquilateralIsAdmissible) {
  const auto rep = validate_constraints(equilateral(0.5), ConstraintParams{}, DomainSpec::unit_square());
  EXPECT_TRUE(rep.ok()) << rep.describe();
  for (const auto& c : rep.checks) EXPECT_GT(c.margin, 0.0) << c.name;
}

TEST(Geometry, ShortSideFails) {
  Polygon p({{0.0, 0.0}, {0.05, 0.0}, {0.02, -0.3}});
  const auto rep = validate_constraints(p, ConstraintParams{}, DomainSpec::unit_square());
  EXPECT_FALSE(rep.ok());
  EXPECT_FALSE(check(rep, "side").pass);
  EXPECT_NEAR(check(rep, "side").margin, 0.05 - 0.1, 1e-12);
}

TEST(Geometry, MarginFails) {
  Polygon p({{0.98, 0.0}, {0.6, -0.3}, {0.6, 0.3}});
  const auto rep = validate_constraints(p, ConstraintParams{}, DomainSpec::unit_square());
  EXPECT_FALSE(check(rep, "margin").pass);
  EXPECT_NEAR(check(rep, "margin").margin, 0.02 - 0.1, 1e-12);
  EXPECT_TRUE(check(rep, "side").pass);
}

TEST(Geometry, PerturbBasics) {
  Polygon p({{0, 0}, {0.4, -0.5}, {-0.3, -0.4}});
  EXPECT_EQ(perturb(p, VelocityField::zero(3), 0.0).vertices(), p.vertices());

  VelocityField V = VelocityField::zero(3);
  V[0] = {1, 0};
  const Polygon q = perturb(p, V, 0.1);
  EXPECT_DOUBLE_EQ(q[0].x, 0.1);
  EXPECT_DOUBLE_EQ(q[0].y, 0.0);

  const VelocityField T({{0.3, -0.7}, {0.3, -0.7}, {0.3, -0.7}});
  const Polygon r = perturb(p, T, 0.2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(norm(r[i] - r[j]), norm(p[i] - p[j]), 1e-14);
}

TEST(Geometry, PerturbRejectsFlip) {
  Polygon p({{0, 0}, {0, 1}, {1, 0}});
  VelocityField V({{2, 2}, {0, 0}, {0, 0}});
  EXPECT_THROW(perturb(p, V, 1.0), GeometryError);
}

TEST(Geometry, EdgeFrameExamples) {
  Polygon p({{0, 0}, {1, 0}, {0, -1}});
  ASSERT_FALSE(p.was_reversed());
  const auto e0 = edge_frame(p, 0);
  EXPECT_NEAR(e0.tangent.x, 1.0, 1e-15);
  EXPECT_NEAR(e0.tangent.y, 0.0, 1e-15);
  EXPECT_NEAR(e0.normal.x, 0.0, 1e-15);
  EXPECT_NEAR(e0.normal.y, 1.0, 1e-15);
  const auto e2 = edge_frame(p, 2);
  EXPECT_NEAR(e2.tangent.x, 0.0, 1e-15);
  EXPECT_NEAR(e2.tangent.y, 1.0, 1e-15);
  EXPECT_NEAR(e2.normal.x, -1.0, 1e-15);
  EXPECT_NEAR(e2.normal.y, 0.0, 1e-15);

  const Polygon q({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}, {-0.35, 0.2}});
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto f = edge_frame(q, i);
    EXPECT_LT(dot(f.normal, q.centroid() - 0.5 * (f.start + f.end)), 0.0);
  }
}

TEST(Geometry, InterfaceVelocity) {
  Polygon p({{0, 0}, {1, 0}, {0, -1}});
  VelocityField V({{1, 0}, {0, 0}, {0.2, 0.7}});
  const Vec2 at_vertex = interface_velocity(p, V, 0, p[0]);
  EXPECT_DOUBLE_EQ(at_vertex.x, 1.0);
  EXPECT_DOUBLE_EQ(at_vertex.y, 0.0);
  const Vec2 mid = interface_velocity(p, V, 0, {0.5, 0.0});
  EXPECT_NEAR(mid.x, 0.5, 1e-15);
  EXPECT_NEAR(mid.y, 0.0, 1e-15);

  VelocityField W({{0.3, -0.1}, {0.3, -0.1}, {0.3, -0.1}});
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec2 q = p.vertex(i) + 0.37 * (p.vertex(i + 1) - p.vertex(i));
    const Vec2 w = interface_velocity(p, W, i, q);
    EXPECT_NEAR(w.x, 0.3, 1e-15);
    EXPECT_NEAR(w.y, -0.1, 1e-15);
  }
  EXPECT_THROW(interface_velocity(p, V, 0, {0.5, 0.1}), GeometryError);
}

TEST(Geometry, SymmetricDifferenceExact) {
  Polygon sq({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  EXPECT_NEAR(symmetric_difference_area(sq, sq), 0.0, 1e-15);
  for (double t : {0.1, 0.25, 0.6}) {
    Polygon sh({{t, 0}, {t, 1}, {1 + t, 1}, {1 + t, 0}});
    EXPECT_NEAR(symmetric_difference_area(sq, sh), 2.0 * t, 1e-13);
  }
}

// Monte-Carlo membership over random admissible triangle pairs.
TEST(Geometry, SymmetricDifferenceMonteCarlo) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  const DomainSpec dom = DomainSpec::unit_square();
  int tested = 0;
  while (tested < 3) {
    Polygon a({{U(rng), U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)}});
    Polygon b({{U(rng), U(rng)}, {U(rng), U(rng)}, {U(rng), U(rng)}});
    if (!validate_constraints(a, {}, dom).ok() || !validate_constraints(b, {}, dom).ok()) continue;
    const double exact = symmetric_difference_area(a, b);
    std::uniform_real_distribution<double> S(-1.0, 1.0);
    const int n = 1000000;
    int hit = 0;
    for (int i = 0; i < n; ++i) {
      const Vec2 x{S(rng), S(rng)};
      hit += a.contains(x) != b.contains(x);
    }
    const double mc = 4.0 * hit / n;
    EXPECT_NEAR(mc, exact, 0.01 * exact) << "case " << tested;
    ++tested;
  }
}

TEST(Geometry, HausdorffDilatedSquare) {
  const double s = 0.3, eps = 0.05;
  Polygon a({{-s, -s}, {-s, s}, {s, s}, {s, -s}});
  const double S = s * (1 + eps);
  Polygon b({{-S, -S}, {-S, S}, {S, S}, {S, -S}});
  EXPECT_NEAR(hausdorff_distance(a, a), 0.0, 1e-15);
  EXPECT_NEAR(hausdorff_distance(a, b), eps * s * std::sqrt(2.0), 1e-13);
}

TEST(Geometry, RelabelKeepsSet) {
  Polygon p({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}});
  const Polygon q = p.relabeled(1);
  EXPECT_EQ(q[0], p[1]);
  EXPECT_NEAR(q.area(), p.area(), 1e-15);
  EXPECT_NEAR(symmetric_difference_area(p, q), 0.0, 1e-15);
}

TEST(Geometry, AdmissibleTBound) {
  VelocityField V({{0.3, 0.4}, {0, 0}, {1, 0}});
  EXPECT_DOUBLE_EQ(admissible_t_bound(V, 0.1), 0.05);
}
