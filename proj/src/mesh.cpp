#include "polyeit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>

#include "cdt.hpp"
#include "polyeit/errors.hpp"

namespace polyeit {

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

double tri_signed_area(const Vec2& a, const Vec2& b, const Vec2& c) { return 0.5 * cross(b - a, c - a); }

double point_triangle_distance(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double o1 = cross(b - a, p - a), o2 = cross(c - b, p - b), o3 = cross(a - c, p - c);
  if (o1 >= 0.0 && o2 >= 0.0 && o3 >= 0.0) return 0.0;
  return std::min({point_segment_distance(p, a, b), point_segment_distance(p, b, c), point_segment_distance(p, c, a)});
}

std::array<double, 3> angles_of(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto at = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const Vec2 u = q - p, w = r - p;
    return std::atan2(std::abs(cross(u, w)), dot(u, w));
  };
  return {at(a, b, c), at(b, c, a), at(c, a, b)};
}

Vec2 circumcenter_of(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double l1 = norm2(ab), l2 = norm2(ac);
  return a + Vec2((ac.y * l1 - ab.y * l2) / d, (ab.x * l2 - ac.x * l1) / d);
}

// Mean value coordinates of x strictly inside a convex polygon.
std::vector<double> mean_value_coordinates(const std::vector<Vec2>& v, const Vec2& x) {
  const std::size_t n = v.size();
  std::vector<double> r(n), tan_half(n), w(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = distance(v[i], x);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i] - x, b = v[(i + 1) % n] - x;
    const double ang = std::atan2(std::abs(cross(a, b)), dot(a, b));
    tan_half[i] = std::tan(0.5 * ang);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = (tan_half[(i + n - 1) % n] + tan_half[i]) / r[i];
    sum += w[i];
  }
  for (auto& x_ : w) x_ /= sum;
  return w;
}

struct Built {
  std::vector<Vec2> nodes;
  std::vector<MeshTriangle> tris;
  std::vector<BoundaryEdge> boundary;
  std::vector<int> poly_vertex_node;          // first polygon vertices
  std::vector<int> node_poly_edge;            // first-polygon edge through a node, or -1
};

Built triangulate(const DomainSpec& dom, const std::vector<Polygon>& polys, const GradingSpec& grading,
                  const MeshOptions& opts) {
  const auto bnd = dom.boundary();
  Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Vec2 hi(-lo.x, -lo.y);
  for (const auto& p : bnd) {
    lo = Vec2(std::min(lo.x, p.x), std::min(lo.y, p.y));
    hi = Vec2(std::max(hi.x, p.x), std::max(hi.y, p.y));
  }
  detail::Cdt cdt(lo, hi);

  std::vector<int> bid;
  for (const auto& p : bnd) bid.push_back(cdt.add_vertex(p, true));
  std::vector<std::vector<int>> pid(polys.size());
  for (std::size_t p = 0; p < polys.size(); ++p) {
    for (const auto& v : polys[p].vertices()) {
      if (!dom.contains(v) || dom.distance_to_boundary(v) <= 0.0)
        throw MeshError("polygon vertex " + std::to_string(v.x) + ", " + std::to_string(v.y) + " is not inside the domain");
      pid[p].push_back(cdt.add_vertex(v, true));
    }
  }

  // Crossings between the two polygons become input vertices.
  std::vector<std::vector<std::vector<std::pair<double, int>>>> splits(polys.size());
  for (std::size_t p = 0; p < polys.size(); ++p) splits[p].resize(polys[p].size());
  if (polys.size() == 2) {
    const Polygon& A = polys[0];
    const Polygon& B = polys[1];
    constexpr double eps = 1e-11;
    for (std::size_t i = 0; i < A.size(); ++i) {
      const Vec2 a0 = A.vertex(i), da = A.vertex(i + 1) - a0;
      for (std::size_t j = 0; j < B.size(); ++j) {
        const Vec2 b0 = B.vertex(j), db = B.vertex(j + 1) - b0;
        const double den = cross(da, db);
        if (std::abs(den) <= 1e-14 * norm(da) * norm(db)) continue;
        const double s = cross(b0 - a0, db) / den;
        const double u = cross(b0 - a0, da) / den;
        if (s <= eps || s >= 1.0 - eps || u <= eps || u >= 1.0 - eps) continue;
        const int v = cdt.add_vertex(a0 + s * da, true);
        splits[0][i].emplace_back(s, v);
        splits[1][j].emplace_back(u, v);
      }
    }
  }

  for (std::size_t i = 0; i < bnd.size(); ++i) {
    detail::SegmentTag tag;
    tag.domain_side = static_cast<int>(i);
    tag.orig_a = bid[i];
    tag.orig_b = bid[(i + 1) % bnd.size()];
    cdt.insert_segment(tag.orig_a, tag.orig_b, tag);
  }
  for (std::size_t p = 0; p < polys.size(); ++p) {
    const std::size_t n = polys[p].size();
    for (std::size_t i = 0; i < n; ++i) {
      detail::SegmentTag tag;
      tag.poly_edge[p] = static_cast<int>(i);
      tag.orig_a = pid[p][i];
      tag.orig_b = pid[p][(i + 1) % n];
      auto cuts = splits[p][i];
      std::sort(cuts.begin(), cuts.end());
      std::vector<int> chain{tag.orig_a};
      for (const auto& c : cuts) chain.push_back(c.second);
      chain.push_back(tag.orig_b);
      for (std::size_t k = 0; k + 1 < chain.size(); ++k) cdt.insert_segment(chain[k], chain[k + 1], tag);
    }
  }
  cdt.remove_exterior();

  std::vector<Vec2> corners;
  for (const auto& poly : polys)
    for (const auto& v : poly.vertices()) corners.push_back(v);
  const double r_g = grading.r_g;
  detail::RefineParams rp;
  rp.min_angle_deg = opts.min_angle_deg;
  rp.quality = polys.size() <= 1;
  rp.size = [&](const Vec2& a, const Vec2& b, const Vec2& c) {
    double s = grading.h;
    for (const auto& v : corners) {
      const double d = point_triangle_distance(v, a, b, c);
      if (d < r_g) s = std::min(s, grading.size_at_distance(d));
    }
    if (grading.interface_h > 0.0 && grading.interface_h < s) {
      const Vec2 g = (a + b + c) / 3.0;
      const double reach = std::max({distance(g, a), distance(g, b), distance(g, c)});
      for (const auto& poly : polys)
        if (poly.boundary_distance(g) <= reach) {
          s = grading.interface_h;
          break;
        }
    }
    return s;
  };
  cdt.refine(rp);

  const auto& pts = cdt.points();
  const auto& ctris = cdt.triangles();

  if (opts.enforce_quality && rp.quality) {
    double worst = 180.0;
    for (const auto& T : ctris) {
      if (!T.alive) continue;
      const auto ang = angles_of(pts[static_cast<std::size_t>(T.v[0])], pts[static_cast<std::size_t>(T.v[1])],
                                 pts[static_cast<std::size_t>(T.v[2])]);
      for (int k = 0; k < 3; ++k) {
        // Input angles between two constraints are exempt.
        const bool pinned = ((T.con >> ((k + 1) % 3)) & 1u) && ((T.con >> ((k + 2) % 3)) & 1u);
        if (!pinned) worst = std::min(worst, ang[static_cast<std::size_t>(k)] * 180.0 / std::numbers::pi);
      }
    }
    if (worst < opts.min_angle_deg - 1e-9)
      throw MeshError("mesh min angle " + std::to_string(worst) + " deg is below the quality floor of " +
                      std::to_string(opts.min_angle_deg) + " deg");
  }

  Built out;
  std::vector<int> node_of(pts.size(), -1);
  std::vector<char> used(pts.size(), 0);
  for (const auto& T : ctris)
    if (T.alive)
      for (const int v : T.v) used[static_cast<std::size_t>(v)] = 1;
  for (std::size_t v = 3; v < pts.size(); ++v)
    if (used[v]) {
      node_of[v] = static_cast<int>(out.nodes.size());
      out.nodes.push_back(pts[v]);
    }
  out.node_poly_edge.assign(out.nodes.size(), -1);
  for (const auto& T : ctris) {
    if (!T.alive) continue;
    MeshTriangle mt;
    for (int k = 0; k < 3; ++k) mt.v[static_cast<std::size_t>(k)] = node_of[static_cast<std::size_t>(T.v[static_cast<std::size_t>(k)])];
    out.tris.push_back(mt);
    for (int k = 0; k < 3; ++k) {
      if (!((T.con >> k) & 1u)) continue;
      const int a = T.v[static_cast<std::size_t>((k + 1) % 3)];
      const int b = T.v[static_cast<std::size_t>((k + 2) % 3)];
      const detail::SegmentTag* tag = cdt.tag(a, b);
      if (!tag) continue;
      if (tag->domain_side >= 0)
        out.boundary.push_back({node_of[static_cast<std::size_t>(a)], node_of[static_cast<std::size_t>(b)], tag->domain_side});
      if (tag->poly_edge[0] >= 0) {
        out.node_poly_edge[static_cast<std::size_t>(node_of[static_cast<std::size_t>(a)])] = tag->poly_edge[0];
        out.node_poly_edge[static_cast<std::size_t>(node_of[static_cast<std::size_t>(b)])] = tag->poly_edge[0];
      }
    }
  }
  if (!polys.empty())
    for (const int v : pid[0]) out.poly_vertex_node.push_back(node_of[static_cast<std::size_t>(v)]);
  std::sort(out.boundary.begin(), out.boundary.end(), [](const BoundaryEdge& x, const BoundaryEdge& y) {
    return std::tie(x.marker, x.a, x.b) < std::tie(y.marker, y.a, y.b);
  });
  return out;
}

// Moves the nodes of a mesh built for `from` so that it conforms to `to`.
void morph(Built& b, const DomainSpec& dom, const Polygon& from, const Polygon& to) {
  const std::size_t n = from.size();
  std::vector<Vec2> disp(n);
  for (std::size_t i = 0; i < n; ++i) disp[i] = to[i] - from[i];
  double reach = std::numeric_limits<double>::infinity();
  for (const auto& v : from.vertices()) reach = std::min(reach, dom.distance_to_boundary(v));
  reach *= 0.5;
  std::vector<char> pinned(b.nodes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<std::size_t>(b.poly_vertex_node[i]);
    b.nodes[id] = to[i];
    pinned[id] = 1;
  }
  for (std::size_t k = 0; k < b.nodes.size(); ++k) {
    if (pinned[k]) continue;
    const Vec2 x = b.nodes[k];
    const int e = b.node_poly_edge[k];
    if (e >= 0) {
      const auto i = static_cast<std::size_t>(e);
      const double s = std::clamp(edge_parameter(from, i, x), 0.0, 1.0);
      b.nodes[k] = (1.0 - s) * to.vertex(i) + s * to.vertex(i + 1);
      continue;
    }
    if (from.contains(x)) {
      const auto w = mean_value_coordinates(from.vertices(), x);
      Vec2 d;
      for (std::size_t i = 0; i < n; ++i) d += w[i] * disp[i];
      b.nodes[k] = x + d;
      continue;
    }
    double best = std::numeric_limits<double>::infinity(), s_best = 0.0;
    std::size_t e_best = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double s;
      const double d = point_segment_distance(x, from.vertex(i), from.vertex(i + 1), &s);
      if (d < best) {
        best = d;
        s_best = s;
        e_best = i;
      }
    }
    const double r = best / reach;
    if (r >= 1.0) continue;
    const double cut = 1.0 - r * r * (3.0 - 2.0 * r);
    const Vec2 phi = (1.0 - s_best) * disp[e_best] + s_best * disp[(e_best + 1) % n];
    b.nodes[k] = x + cut * phi;
  }
  for (const auto& t : b.tris)
    if (!(tri_signed_area(b.nodes[static_cast<std::size_t>(t.v[0])], b.nodes[static_cast<std::size_t>(t.v[1])],
                          b.nodes[static_cast<std::size_t>(t.v[2])]) > 0.0))
      throw MeshError("anchored mesh folded under the polygon motion");
}

}  // namespace

// ---------------------------------------------------------------------------
// Mesh

Mesh::Mesh(std::vector<Vec2> nodes, std::vector<MeshTriangle> triangles, std::vector<BoundaryEdge> boundary_edges,
           std::vector<InterfaceEdge> interface_edges)
    : nodes_(std::move(nodes)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)),
      interface_edges_(std::move(interface_edges)) {
  if (nodes_.empty() || triangles_.empty()) throw MeshError("mesh has no nodes or no triangles");
  const auto nn = static_cast<int>(nodes_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    for (const int v : triangles_[t].v)
      if (v < 0 || v >= nn) throw MeshError("triangle " + std::to_string(t) + " references a missing node");
    if (!(triangle_area(t) > 0.0)) throw MeshError("triangle " + std::to_string(t) + " has non-positive area");
  }
  build_boundary_loop();
  build_grid();
}

double Mesh::triangle_area(std::size_t t) const {
  const auto& v = triangles_[t].v;
  return tri_signed_area(nodes_[static_cast<std::size_t>(v[0])], nodes_[static_cast<std::size_t>(v[1])],
                         nodes_[static_cast<std::size_t>(v[2])]);
}

Vec2 Mesh::centroid(std::size_t t) const {
  const auto& v = triangles_[t].v;
  return (nodes_[static_cast<std::size_t>(v[0])] + nodes_[static_cast<std::size_t>(v[1])] +
          nodes_[static_cast<std::size_t>(v[2])]) /
         3.0;
}

std::array<Vec2, 3> Mesh::hat_gradients(std::size_t t) const {
  const auto& v = triangles_[t].v;
  const Vec2& a = nodes_[static_cast<std::size_t>(v[0])];
  const Vec2& b = nodes_[static_cast<std::size_t>(v[1])];
  const Vec2& c = nodes_[static_cast<std::size_t>(v[2])];
  const double twice = cross(b - a, c - a);
  // grad phi_i = perp(edge opposite i) / (2 area), edges taken counter-clockwise
  return {Vec2(b.y - c.y, c.x - b.x) / twice, Vec2(c.y - a.y, a.x - c.x) / twice, Vec2(a.y - b.y, b.x - a.x) / twice};
}

double Mesh::total_area() const {
  double s = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) s += triangle_area(t);
  return s;
}

std::vector<Region> Mesh::regions_for(const Polygon& poly) const {
  std::vector<Region> r(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t)
    r[t] = poly.contains(centroid(t)) ? Region::inside : Region::outside;
  return r;
}

void Mesh::build_boundary_loop() {
  boundary_index_.assign(nodes_.size(), -1);
  loop_ = {};
  if (boundary_edges_.empty()) return;
  std::unordered_map<int, int> next;
  std::unordered_map<int, int> has_prev;
  for (const auto& e : boundary_edges_) {
    if (!next.emplace(e.a, e.b).second) throw MeshError("outer boundary is not a simple loop");
    has_prev[e.b] = 1;
  }
  // Start at the first corner: the tail of side 0 with no side-0 predecessor.
  int start = -1;
  int min_marker = std::numeric_limits<int>::max();
  for (const auto& e : boundary_edges_) min_marker = std::min(min_marker, e.marker);
  std::unordered_map<int, int> marker_of_incoming;
  for (const auto& e : boundary_edges_) marker_of_incoming[e.b] = e.marker;
  for (const auto& e : boundary_edges_) {
    if (e.marker != min_marker) continue;
    auto it = marker_of_incoming.find(e.a);
    if (it == marker_of_incoming.end() || it->second != min_marker) {
      start = e.a;
      break;
    }
  }
  if (start < 0) start = boundary_edges_.front().a;
  int cur = start;
  double arc = 0.0;
  do {
    if (boundary_index_[static_cast<std::size_t>(cur)] >= 0) throw MeshError("outer boundary revisits a node");
    boundary_index_[static_cast<std::size_t>(cur)] = static_cast<int>(loop_.nodes.size());
    loop_.nodes.push_back(cur);
    loop_.arc.push_back(arc);
    auto it = next.find(cur);
    if (it == next.end()) throw MeshError("outer boundary loop is open");
    arc += distance(nodes_[static_cast<std::size_t>(cur)], nodes_[static_cast<std::size_t>(it->second)]);
    cur = it->second;
  } while (cur != start);
  if (loop_.nodes.size() != boundary_edges_.size()) throw MeshError("outer boundary has more than one loop");
  loop_.perimeter = arc;
  const std::size_t nb = loop_.nodes.size();
  loop_.weight.assign(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    const double len = distance(nodes_[static_cast<std::size_t>(loop_.nodes[i])],
                                nodes_[static_cast<std::size_t>(loop_.nodes[(i + 1) % nb])]);
    loop_.weight[i] += 0.5 * len;
    loop_.weight[(i + 1) % nb] += 0.5 * len;
  }
}

void Mesh::build_grid() {
  Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Vec2 hi(-lo.x, -lo.y);
  for (const auto& p : nodes_) {
    lo = Vec2(std::min(lo.x, p.x), std::min(lo.y, p.y));
    hi = Vec2(std::max(hi.x, p.x), std::max(hi.y, p.y));
  }
  const double w = std::max(hi.x - lo.x, 1e-12), h = std::max(hi.y - lo.y, 1e-12);
  const double cells = std::max(1.0, static_cast<double>(triangles_.size()) / 2.0);
  grid_cell_ = std::sqrt(w * h / cells);
  grid_nx_ = std::max(1, static_cast<int>(std::ceil(w / grid_cell_)));
  grid_ny_ = std::max(1, static_cast<int>(std::ceil(h / grid_cell_)));
  grid_lo_ = lo;
  auto cell_range = [&](std::size_t t, int& i0, int& i1, int& j0, int& j1) {
    const auto& v = triangles_[t].v;
    double x0 = std::numeric_limits<double>::max(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const int k : v) {
      const Vec2& p = nodes_[static_cast<std::size_t>(k)];
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    i0 = std::clamp(static_cast<int>((x0 - lo.x) / grid_cell_), 0, grid_nx_ - 1);
    i1 = std::clamp(static_cast<int>((x1 - lo.x) / grid_cell_), 0, grid_nx_ - 1);
    j0 = std::clamp(static_cast<int>((y0 - lo.y) / grid_cell_), 0, grid_ny_ - 1);
    j1 = std::clamp(static_cast<int>((y1 - lo.y) / grid_cell_), 0, grid_ny_ - 1);
  };
  grid_start_.assign(static_cast<std::size_t>(grid_nx_) * static_cast<std::size_t>(grid_ny_) + 1, 0);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    int i0, i1, j0, j1;
    cell_range(t, i0, i1, j0, j1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) ++grid_start_[static_cast<std::size_t>(j * grid_nx_ + i) + 1];
  }
  for (std::size_t c = 1; c < grid_start_.size(); ++c) grid_start_[c] += grid_start_[c - 1];
  grid_items_.assign(static_cast<std::size_t>(grid_start_.back()), 0);
  std::vector<int> fill(grid_start_.begin(), grid_start_.end() - 1);
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    int i0, i1, j0, j1;
    cell_range(t, i0, i1, j0, j1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        grid_items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(j * grid_nx_ + i)]++)] = static_cast<int>(t);
  }
}

void Mesh::candidates(const Vec2& lo, const Vec2& hi, std::vector<int>& out) const {
  out.clear();
  const int i0 = std::clamp(static_cast<int>(std::floor((lo.x - grid_lo_.x) / grid_cell_)), 0, grid_nx_ - 1);
  const int i1 = std::clamp(static_cast<int>(std::floor((hi.x - grid_lo_.x) / grid_cell_)), 0, grid_nx_ - 1);
  const int j0 = std::clamp(static_cast<int>(std::floor((lo.y - grid_lo_.y) / grid_cell_)), 0, grid_ny_ - 1);
  const int j1 = std::clamp(static_cast<int>(std::floor((hi.y - grid_lo_.y) / grid_cell_)), 0, grid_ny_ - 1);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const auto c = static_cast<std::size_t>(j * grid_nx_ + i);
      for (int k = grid_start_[c]; k < grid_start_[c + 1]; ++k) out.push_back(grid_items_[static_cast<std::size_t>(k)]);
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

int Mesh::locate(const Vec2& p, std::array<double, 3>* bary, double tol) const {
  std::vector<int> cand;
  const Vec2 pad(grid_cell_ * 1e-9, grid_cell_ * 1e-9);
  candidates(p - pad, p + pad, cand);
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  std::array<double, 3> best_bary{};
  for (const int t : cand) {
    const auto& v = triangles_[static_cast<std::size_t>(t)].v;
    const Vec2& a = nodes_[static_cast<std::size_t>(v[0])];
    const Vec2& b = nodes_[static_cast<std::size_t>(v[1])];
    const Vec2& c = nodes_[static_cast<std::size_t>(v[2])];
    const double twice = cross(b - a, c - a);
    const std::array<double, 3> l{cross(c - b, p - b) / twice, cross(a - c, p - c) / twice, cross(b - a, p - a) / twice};
    const double m = std::min({l[0], l[1], l[2]});
    if (m > best_min) {
      best_min = m;
      best = t;
      best_bary = l;
    }
  }
  if (best < 0 || best_min < -tol) return -1;
  if (bary) *bary = best_bary;
  return best;
}

// ---------------------------------------------------------------------------
// Grading and generation

GradingSpec GradingSpec::with_defaults(double h) {
  GradingSpec g;
  g.h = h;
  g.h_min = h / 64.0;
  return g;
}

void GradingSpec::validate() const {
  if (!(h > 0.0)) throw ValidationError("grading: h must be positive");
  if (!(h_min > 0.0 && h_min <= h)) throw ValidationError("grading: need 0 < h_min <= h");
  if (!(mu >= 1.0)) throw ValidationError("grading: mu must be at least 1");
  if (!(r_g > 0.0)) throw ValidationError("grading: r_g must be positive");
  if (interface_h < 0.0) throw ValidationError("grading: interface_h must be non-negative");
}

double GradingSpec::size_at_distance(double d) const {
  if (d >= r_g) return h;
  return std::max(h_min, h * std::pow(d / r_g, mu));
}

MeshPtr generate_mesh(const DomainSpec& dom, const std::vector<Polygon>& polys, const GradingSpec& grading,
                      const MeshOptions& opts) {
  dom.validate();
  grading.validate();
  if (polys.size() > 2) throw ValidationError("mesh: at most two constraint polygons are supported");
  // Insertion starts at the lexicographically smallest vertex, so the mesh
  // does not depend on where the vertex list starts.
  auto start_of = [](const Polygon& p) {
    std::size_t s = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (std::tie(p[i].x, p[i].y) < std::tie(p[s].x, p[s].y)) s = i;
    return s;
  };
  Built b;
  if (opts.anchor) {
    const auto& anchor = *opts.anchor;
    if (anchor.size() != 1 || polys.size() != 1 || anchor[0].size() != polys[0].size())
      throw ValidationError("mesh: anchoring needs one polygon with matching vertex count");
    const std::size_t s = start_of(anchor[0]);
    const Polygon from = anchor[0].relabeled(s);
    b = triangulate(dom, {from}, grading, opts);
    morph(b, dom, from, polys[0].relabeled(s));
  } else {
    std::vector<Polygon> canon;
    for (const auto& p : polys) canon.push_back(p.relabeled(start_of(p)));
    b = triangulate(dom, canon, grading, opts);
  }
  if (polys.empty()) return std::make_shared<const Mesh>(std::move(b.nodes), std::move(b.tris), std::move(b.boundary),
                                                         std::vector<InterfaceEdge>{});

  // Region labels and the interface ring come from the first polygon.
  auto draft = std::make_shared<Mesh>(b.nodes, b.tris, b.boundary, std::vector<InterfaceEdge>{});
  const auto regions = draft->regions_for(polys[0]);
  for (std::size_t t = 0; t < b.tris.size(); ++t) b.tris[t].region = regions[t];
  const InterfaceRing ring = interface_ring(*draft, polys[0]);
  std::vector<InterfaceEdge> iface;
  iface.reserve(ring.edges.size());
  for (const auto& e : ring.edges) iface.push_back({e.a, e.b, e.poly_edge, e.tri_in, e.tri_out});
  return std::make_shared<const Mesh>(std::move(b.nodes), std::move(b.tris), std::move(b.boundary), std::move(iface));
}

MeshQuality mesh_quality(const Mesh& m) {
  MeshQuality q;
  q.node_count = m.node_count();
  q.triangle_count = m.triangle_count();
  q.min_angle_deg = 180.0;
  const auto& nodes = m.nodes();
  for (const auto& t : m.triangles()) {
    const Vec2& a = nodes[static_cast<std::size_t>(t.v[0])];
    const Vec2& b = nodes[static_cast<std::size_t>(t.v[1])];
    const Vec2& c = nodes[static_cast<std::size_t>(t.v[2])];
    const auto ang = angles_of(a, b, c);
    q.min_angle_deg = std::min(q.min_angle_deg, std::min({ang[0], ang[1], ang[2]}) * 180.0 / std::numbers::pi);
    const double la = distance(b, c), lb = distance(c, a), lc = distance(a, b);
    const double area = std::abs(tri_signed_area(a, b, c));
    const double inradius = 2.0 * area / (la + lb + lc);
    q.max_aspect = std::max(q.max_aspect, std::max({la, lb, lc}) / (2.0 * std::sqrt(3.0) * inradius));
    q.h_eff = std::max(q.h_eff, 2.0 * distance(circumcenter_of(a, b, c), a));
  }
  return q;
}

// ---------------------------------------------------------------------------
// Interface ring

double InterfaceRing::length() const {
  double s = 0.0;
  for (const auto& e : edges) s += e.length;
  return s;
}

InterfaceRing interface_ring(const Mesh& m, const Polygon& poly) {
  const auto& nodes = m.nodes();
  const auto& tris = m.triangles();
  const double tol = 1e-10 * std::max(1.0, poly.diameter());
  InterfaceRing ring;
  std::vector<int> cand;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly.vertex(i), q = poly.vertex(i + 1);
    const Vec2 lo(std::min(p.x, q.x) - tol, std::min(p.y, q.y) - tol);
    const Vec2 hi(std::max(p.x, q.x) + tol, std::max(p.y, q.y) + tol);
    m.candidates(lo, hi, cand);
    std::map<std::uint64_t, RingEdge> found;
    for (const int t : cand) {
      const auto& v = tris[static_cast<std::size_t>(t)].v;
      for (int k = 0; k < 3; ++k) {
        const int a = v[static_cast<std::size_t>((k + 1) % 3)];
        const int b = v[static_cast<std::size_t>((k + 2) % 3)];
        const Vec2& pa = nodes[static_cast<std::size_t>(a)];
        const Vec2& pb = nodes[static_cast<std::size_t>(b)];
        if (point_segment_distance(pa, p, q) > tol || point_segment_distance(pb, p, q) > tol) continue;
        const double sa = edge_parameter(poly, i, pa), sb = edge_parameter(poly, i, pb);
        auto [it, fresh] = found.try_emplace(edge_key(a, b));
        RingEdge& e = it->second;
        if (fresh) {
          e.poly_edge = static_cast<int>(i);
          e.a = sa < sb ? a : b;
          e.b = sa < sb ? b : a;
          e.s0 = std::min(sa, sb);
          e.s1 = std::max(sa, sb);
          e.length = distance(pa, pb);
          e.midpoint = 0.5 * (pa + pb);
        }
        const bool inside = poly.contains(m.centroid(static_cast<std::size_t>(t)));
        (inside ? e.tri_in : e.tri_out) = t;
      }
    }
    std::vector<RingEdge> es;
    for (auto& [k, e] : found) es.push_back(e);
    std::sort(es.begin(), es.end(), [](const RingEdge& x, const RingEdge& y) { return x.s0 < y.s0; });
    double covered = 0.0;
    for (std::size_t j = 0; j < es.size(); ++j) {
      if (es[j].tri_in < 0 || es[j].tri_out < 0)
        throw MeshError("interface edge on polygon edge " + std::to_string(i) + " lacks a triangle on one side");
      if (j > 0 && es[j].a != es[j - 1].b)
        throw MeshError("interface ring is open on polygon edge " + std::to_string(i));
      covered += es[j].length;
    }
    const double len = distance(p, q);
    if (es.empty() || std::abs(covered - len) > 1e-10 * std::max(1.0, len) ||
        distance(nodes[static_cast<std::size_t>(es.front().a)], p) > tol ||
        distance(nodes[static_cast<std::size_t>(es.back().b)], q) > tol)
      throw MeshError("interface ring is open on polygon edge " + std::to_string(i));
    for (auto& e : es) ring.edges.push_back(e);
  }
  return ring;
}

// ---------------------------------------------------------------------------
// Text format

void write_mesh(std::ostream& os, const Mesh& m) {
  const auto old_prec = os.precision(17);
  os << "NODES " << m.node_count() << '\n';
  for (std::size_t i = 0; i < m.node_count(); ++i) os << i << ' ' << m.nodes()[i].x << ' ' << m.nodes()[i].y << '\n';
  os << "TRIANGLES " << m.triangle_count() << '\n';
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tr = m.triangles()[t];
    os << t << ' ' << tr.v[0] << ' ' << tr.v[1] << ' ' << tr.v[2] << ' ' << static_cast<int>(tr.region) << '\n';
  }
  os << "BOUNDARY_EDGES " << m.boundary_edges().size() << '\n';
  for (const auto& e : m.boundary_edges()) os << e.a << ' ' << e.b << ' ' << e.marker << '\n';
  os << "INTERFACE_EDGES " << m.interface_edges().size() << '\n';
  for (const auto& e : m.interface_edges())
    os << e.a << ' ' << e.b << ' ' << e.poly_edge << ' ' << e.tri_in << ' ' << e.tri_out << '\n';
  os.precision(old_prec);
}

MeshPtr read_mesh(std::istream& is) {
  auto header = [&](const char* name) {
    std::string tag;
    std::size_t n = 0;
    if (!(is >> tag >> n) || tag != name) throw MeshError(std::string("mesh file: expected section ") + name);
    return n;
  };
  auto fail = [](const char* what) { throw MeshError(std::string("mesh file: malformed ") + what + " record"); };
  std::vector<Vec2> nodes(header("NODES"));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::size_t id;
    if (!(is >> id >> nodes[i].x >> nodes[i].y) || id != i) fail("node");
  }
  std::vector<MeshTriangle> tris(header("TRIANGLES"));
  for (std::size_t t = 0; t < tris.size(); ++t) {
    std::size_t id;
    int region;
    if (!(is >> id >> tris[t].v[0] >> tris[t].v[1] >> tris[t].v[2] >> region) || id != t || region < 0 || region > 1)
      fail("triangle");
    tris[t].region = static_cast<Region>(region);
  }
  std::vector<BoundaryEdge> bnd(header("BOUNDARY_EDGES"));
  for (auto& e : bnd)
    if (!(is >> e.a >> e.b >> e.marker)) fail("boundary edge");
  std::vector<InterfaceEdge> iface(header("INTERFACE_EDGES"));
  for (auto& e : iface)
    if (!(is >> e.a >> e.b >> e.poly_edge >> e.tri_in >> e.tri_out)) fail("interface edge");
  return std::make_shared<const Mesh>(std::move(nodes), std::move(tris), std::move(bnd), std::move(iface));
}

MeshPtr structured_square_mesh(int n) {
  if (n < 1) throw ValidationError("structured mesh needs n >= 1");
  const int m = n + 1;
  std::vector<Vec2> nodes;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) nodes.emplace_back(-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n);
  auto id = [m](int i, int j) { return j * m + i; };
  std::vector<MeshTriangle> tris;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      tris.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}, Region::outside});
      tris.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}, Region::outside});
    }
  std::vector<BoundaryEdge> bnd;
  for (int i = 0; i < n; ++i) bnd.push_back({id(i, 0), id(i + 1, 0), 0});
  for (int j = 0; j < n; ++j) bnd.push_back({id(n, j), id(n, j + 1), 1});
  for (int i = n; i > 0; --i) bnd.push_back({id(i, n), id(i - 1, n), 2});
  for (int j = n; j > 0; --j) bnd.push_back({id(0, j), id(0, j - 1), 3});
  return std::make_shared<const Mesh>(std::move(nodes), std::move(tris), std::move(bnd), std::vector<InterfaceEdge>{});
}

}  // namespace polyeit
