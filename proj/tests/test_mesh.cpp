#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/mesh.hpp"

using namespace polyeit;

namespace {

const Polygon kTri({{-0.3, -0.2}, {0.35, -0.25}, {0.05, 0.4}});

GradingSpec coarse(double h = 0.1) {
  GradingSpec g = GradingSpec::with_defaults(h);
  g.h_min = h / 8.0;
  return g;
}

std::set<std::pair<int, int>> edge_set(const Mesh& m) {
  std::set<std::pair<int, int>> s;
  for (const auto& t : m.triangles())
    for (int k = 0; k < 3; ++k) {
      int a = t.v[k], b = t.v[(k + 1) % 3];
      s.insert({std::min(a, b), std::max(a, b)});
    }
  return s;
}

// Every polygon edge is a chain of mesh edges: walk collinear mesh edges
// from one end to the other.
bool edge_covered(const Mesh& m, const std::set<std::pair<int, int>>& edges, const Vec2& p, const Vec2& q) {
  const double L = norm(q - p);
  std::vector<std::pair<double, int>> on;
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    const Vec2 x = m.nodes()[i];
    const double s = dot(x - p, q - p) / (L * L);
    if (s < -1e-12 || s > 1 + 1e-12) continue;
    if (std::abs(cross(q - p, x - p)) / L > 1e-10) continue;
    on.push_back({s, static_cast<int>(i)});
  }
  std::sort(on.begin(), on.end());
  if (on.size() < 2 || on.front().first > 1e-12 || on.back().first < 1 - 1e-12) return false;
  for (std::size_t i = 0; i + 1 < on.size(); ++i) {
    const int a = on[i].second, b = on[i + 1].second;
    if (!edges.count({std::min(a, b), std::max(a, b)})) return false;
  }
  return true;
}

double seg_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double s = std::clamp(dot(p - a, b - a) / norm2(b - a), 0.0, 1.0);
  return norm(p - (a + s * (b - a)));
}

double tri_dist(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d1 = cross(b - a, p - a), d2 = cross(c - b, p - b), d3 = cross(a - c, p - c);
  if ((d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0)) return 0.0;
  return std::min({seg_dist(p, a, b), seg_dist(p, b, c), seg_dist(p, c, a)});
}

}  // namespace

TEST(Mesh, EmptySquareCoversArea) {
  auto m = generate_mesh(DomainSpec::unit_square(), {}, GradingSpec{0.5, 0.5, 2.0, 0.2, 0.0});
  EXPECT_GE(m->triangle_count(), 8u);
  EXPECT_NEAR(m->total_area(), 4.0, 1e-12);
}

TEST(Mesh, InsideAreaMatchesPolygon) {
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  double inside = 0.0;
  for (std::size_t t = 0; t < m->triangle_count(); ++t) {
    const bool in = m->triangles()[t].region == Region::inside;
    EXPECT_EQ(in, kTri.contains(m->centroid(t)));
    if (in) inside += m->triangle_area(t);
    EXPECT_GT(m->triangle_area(t), 0.0);
  }
  EXPECT_NEAR(inside, kTri.area(), 1e-10);
  EXPECT_NEAR(m->total_area(), 4.0, 4e-10);
}

TEST(Mesh, TwoOverlappingTrianglesConform) {
  const Polygon b({{-0.2, -0.35}, {0.4, -0.1}, {-0.1, 0.3}});
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri, b}, coarse());
  const auto edges = edge_set(*m);
  for (const Polygon* p : {&kTri, &b})
    for (std::size_t i = 0; i < p->size(); ++i)
      EXPECT_TRUE(edge_covered(*m, edges, p->vertex(i), p->vertex(i + 1))) << "edge " << i;
  // labels follow the first polygon only
  for (std::size_t t = 0; t < m->triangle_count(); ++t)
    EXPECT_EQ(m->triangles()[t].region == Region::inside, kTri.contains(m->centroid(t)));
}

TEST(Mesh, QualityStructuredSquare) {
  const auto q = mesh_quality(*structured_square_mesh(4));
  EXPECT_NEAR(q.min_angle_deg, 45.0, 1e-10);
  EXPECT_EQ(q.triangle_count, 32u);
  EXPECT_EQ(q.node_count, 25u);
  EXPECT_NEAR(q.h_eff, 0.5 * std::sqrt(2.0), 1e-12);
}

TEST(Mesh, QualityFloor) {
  for (const auto& g : {coarse(0.1), GradingSpec::with_defaults(0.1)}) {
    auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, g);
    EXPECT_GE(mesh_quality(*m).min_angle_deg, 20.0);
  }
}

TEST(Mesh, EmptyMeshRejected) {
  EXPECT_THROW(Mesh({}, {}, {}, {}), MeshError);
}

TEST(Mesh, InterfaceRing) {
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  const auto ring = interface_ring(*m, kTri);
  EXPECT_NEAR(ring.length(), kTri.perimeter(), 1e-10);
  int last_edge = 0;
  double last_s = 0.0;
  for (const auto& e : ring.edges) {
    const auto f = edge_frame(kTri, static_cast<std::size_t>(e.poly_edge));
    // midpoint on its polygon edge
    EXPECT_LT(std::abs(cross(f.end - f.start, e.midpoint - f.start)) / f.length, 1e-12);
    // clockwise order: direction of travel agrees with the edge tangent
    const Vec2 d = m->nodes()[static_cast<std::size_t>(e.b)] - m->nodes()[static_cast<std::size_t>(e.a)];
    EXPECT_GT(dot(d, f.tangent), 0.0);
    EXPECT_GE(e.poly_edge, last_edge);
    if (e.poly_edge == last_edge) EXPECT_GE(e.s0, last_s - 1e-14);
    last_edge = e.poly_edge;
    last_s = e.s1;
    EXPECT_EQ(m->triangles()[static_cast<std::size_t>(e.tri_in)].region, Region::inside);
    EXPECT_EQ(m->triangles()[static_cast<std::size_t>(e.tri_out)].region, Region::outside);
  }
}

TEST(Mesh, RingOfNonConformingMeshFails) {
  EXPECT_THROW(interface_ring(*structured_square_mesh(4), kTri), MeshError);
}

TEST(Mesh, GradingNearVertices) {
  const GradingSpec g = coarse(0.1);
  auto m = generate_mesh(DomainSpec::unit_square(), {kTri}, g);
  int near = 0;
  for (std::size_t t = 0; t < m->triangle_count(); ++t) {
    const auto& v = m->triangles()[t].v;
    const Vec2 a = m->nodes()[v[0]], b = m->nodes()[v[1]], c = m->nodes()[v[2]];
    double d = 1e300;
    for (const auto& p : kTri.vertices()) d = std::min(d, tri_dist(p, a, b, c));
    if (d >= g.r_g) continue;
    ++near;
    const double longest = std::max({norm(b - a), norm(c - b), norm(a - c)});
    EXPECT_LE(longest, g.size_at_distance(d) * (1 + 1e-12)) << "triangle " << t;
  }
  EXPECT_GT(near, 50);
}

TEST(Mesh, RefinementHalvesInterfaceEdges) {
  auto longest = [](const Mesh& m) {
    double L = 0.0;
    for (const auto& e : interface_ring(m, kTri).edges) L = std::max(L, e.length);
    return L;
  };
  const double a = longest(*generate_mesh(DomainSpec::unit_square(), {kTri}, coarse(0.1)));
  const double b = longest(*generate_mesh(DomainSpec::unit_square(), {kTri}, coarse(0.05)));
  EXPECT_GT(a / b, 2.0 / 1.5);
  EXPECT_LT(a / b, 2.0 * 1.5);
}

TEST(Mesh, WriteIsDeterministicAndRoundTrips) {
  auto m1 = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  auto m2 = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  std::ostringstream a, b;
  write_mesh(a, *m1);
  write_mesh(b, *m2);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("NODES ", 0), 0u);

  std::istringstream in(a.str());
  auto r = read_mesh(in);
  std::ostringstream c;
  write_mesh(c, *r);
  EXPECT_EQ(a.str(), c.str());
}

TEST(Mesh, AnchoredMorphKeepsConnectivity) {
  auto base = generate_mesh(DomainSpec::unit_square(), {kTri}, coarse());
  const Polygon moved = perturb(kTri, VelocityField({{0.1, 0.0}, {0.0, 0.1}, {-0.05, 0.0}}), 0.1);
  MeshOptions o;
  o.anchor = std::vector<Polygon>{kTri};
  auto m = generate_mesh(DomainSpec::unit_square(), {moved}, coarse(), o);
  ASSERT_EQ(m->triangle_count(), base->triangle_count());
  for (std::size_t t = 0; t < m->triangle_count(); ++t) EXPECT_EQ(m->triangles()[t].v, base->triangles()[t].v);
  EXPECT_NEAR(interface_ring(*m, moved).length(), moved.perimeter(), 1e-10);
  for (int n : base->boundary().nodes) EXPECT_EQ(m->nodes()[n], base->nodes()[n]);
}

TEST(Mesh, GradingValidation) {
  EXPECT_THROW((GradingSpec{0.1, 0.2, 2.0, 0.2, 0.0}).validate(), ValidationError);
  EXPECT_THROW((GradingSpec{0.1, 0.01, 0.5, 0.2, 0.0}).validate(), ValidationError);
  EXPECT_THROW((GradingSpec{0.1, 0.01, 2.0, 0.0, 0.0}).validate(), ValidationError);
}

TEST(Mesh, Locate) {
  auto m = structured_square_mesh(4);
  std::array<double, 3> bary{};
  const int t = m->locate({0.1, 0.2}, &bary);
  ASSERT_GE(t, 0);
  Vec2 x{0, 0};
  for (int k = 0; k < 3; ++k) x = x + bary[k] * m->nodes()[m->triangles()[t].v[k]];
  EXPECT_NEAR(x.x, 0.1, 1e-14);
  EXPECT_NEAR(x.y, 0.2, 1e-14);
  EXPECT_EQ(m->locate({3.0, 0.0}), -1);
}
