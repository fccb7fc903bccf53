#include "cdt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>

#include "polyeit/errors.hpp"
#include "predicates.hpp"

namespace polyeit::detail {

void SegmentTag::merge(const SegmentTag& o) {
  if (domain_side < 0) domain_side = o.domain_side;
  for (int k = 0; k < 2; ++k)
    if (poly_edge[static_cast<std::size_t>(k)] < 0) poly_edge[static_cast<std::size_t>(k)] = o.poly_edge[static_cast<std::size_t>(k)];
  if (orig_a < 0) {
    orig_a = o.orig_a;
    orig_b = o.orig_b;
  }
}

namespace {

inline int nxt(int i) { return i == 2 ? 0 : i + 1; }
inline int prv(int i) { return i == 0 ? 2 : i - 1; }

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double l1 = norm2(ab), l2 = norm2(ac);
  return a + Vec2((ac.y * l1 - ab.y * l2) / d, (ab.x * l2 - ac.x * l1) / d);
}

}  // namespace

std::uint64_t Cdt::key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

Cdt::Cdt(const Vec2& lo, const Vec2& hi) {
  const Vec2 c = 0.5 * (lo + hi);
  const double r = 20.0 * std::max(norm(hi - lo), 1e-3);
  pts_ = {Vec2(c.x - 2.0 * r, c.y - r), Vec2(c.x + 2.0 * r, c.y - r), Vec2(c.x, c.y + 2.0 * r)};
  input_ = {0, 0, 0};
  vtri_ = {0, 0, 0};
  last_ = new_tri(0, 1, 2);
}

std::uint32_t Cdt::next_random() {
  rng_ ^= rng_ << 13;
  rng_ ^= rng_ >> 17;
  rng_ ^= rng_ << 5;
  return rng_;
}

int Cdt::new_tri(int a, int b, int c) {
  int t;
  if (!free_.empty()) {
    t = free_.back();
    free_.pop_back();
  } else {
    t = static_cast<int>(tris_.size());
    tris_.emplace_back();
  }
  Tri& T = tris_[static_cast<std::size_t>(t)];
  T.v = {a, b, c};
  T.n = {-1, -1, -1};
  T.con = 0;
  T.alive = true;
  vtri_[static_cast<std::size_t>(a)] = t;
  vtri_[static_cast<std::size_t>(b)] = t;
  vtri_[static_cast<std::size_t>(c)] = t;
  return t;
}

void Cdt::kill(int t) {
  tris_[static_cast<std::size_t>(t)].alive = false;
  free_.push_back(t);
}

int Cdt::edge_slot(int t, int a, int b) const {
  const Tri& T = tris_[static_cast<std::size_t>(t)];
  for (int i = 0; i < 3; ++i)
    if (T.v[static_cast<std::size_t>(nxt(i))] == a && T.v[static_cast<std::size_t>(prv(i))] == b) return i;
  return -1;
}

void Cdt::set_neighbor(int t, int i, int u) {
  Tri& T = tris_[static_cast<std::size_t>(t)];
  T.n[static_cast<std::size_t>(i)] = u;
  if (u < 0) return;
  const int a = T.v[static_cast<std::size_t>(nxt(i))];
  const int b = T.v[static_cast<std::size_t>(prv(i))];
  const int j = edge_slot(u, b, a);
  if (j < 0) throw MeshError("triangulation adjacency corrupted");
  tris_[static_cast<std::size_t>(u)].n[static_cast<std::size_t>(j)] = t;
}

bool Cdt::find_edge(int a, int b, int& t, int& i) const {
  int start = vtri_[static_cast<std::size_t>(a)];
  auto holds = [&](int tri) {
    const Tri& T = tris_[static_cast<std::size_t>(tri)];
    return T.alive && (T.v[0] == a || T.v[1] == a || T.v[2] == a);
  };
  if (start < 0 || !holds(start)) {
    start = -1;
    for (std::size_t k = 0; k < tris_.size(); ++k)
      if (holds(static_cast<int>(k))) {
        start = static_cast<int>(k);
        break;
      }
    if (start < 0) return false;
  }
  auto index_of = [&](int tri) {
    const Tri& T = tris_[static_cast<std::size_t>(tri)];
    return T.v[0] == a ? 0 : (T.v[1] == a ? 1 : 2);
  };
  // Counter-clockwise sweep, then clockwise when a hull edge stops it.
  int cur = start;
  while (true) {
    const int ia = index_of(cur);
    const Tri& T = tris_[static_cast<std::size_t>(cur)];
    if (T.v[static_cast<std::size_t>(nxt(ia))] == b) {
      t = cur;
      i = prv(ia);
      return true;
    }
    const int nx = T.n[static_cast<std::size_t>(nxt(ia))];
    if (nx < 0) break;
    cur = nx;
    if (cur == start) return false;
  }
  cur = start;
  while (true) {
    const int ia = index_of(cur);
    const Tri& T = tris_[static_cast<std::size_t>(cur)];
    if (T.v[static_cast<std::size_t>(nxt(ia))] == b) {
      t = cur;
      i = prv(ia);
      return true;
    }
    const int nx = T.n[static_cast<std::size_t>(prv(ia))];
    if (nx < 0) return false;
    cur = nx;
    if (cur == start) return false;
  }
}

Cdt::Location Cdt::locate(const Vec2& p, int hint) {
  int t = hint;
  if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[static_cast<std::size_t>(t)].alive) t = last_;
  if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[static_cast<std::size_t>(t)].alive) {
    t = -1;
    for (std::size_t k = 0; k < tris_.size(); ++k)
      if (tris_[k].alive) {
        t = static_cast<int>(k);
        break;
      }
  }
  const std::size_t cap = 4 * tris_.size() + 64;
  for (std::size_t step = 0; step < cap; ++step) {
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    const int r = static_cast<int>(next_random() % 3u);
    std::array<double, 3> o{};
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = (r + k) % 3;
      const Vec2& a = pts_[static_cast<std::size_t>(T.v[static_cast<std::size_t>(nxt(i))])];
      const Vec2& b = pts_[static_cast<std::size_t>(T.v[static_cast<std::size_t>(prv(i))])];
      o[static_cast<std::size_t>(i)] = orient2d(a, b, p);
      if (o[static_cast<std::size_t>(i)] < 0.0) {
        const int u = T.n[static_cast<std::size_t>(i)];
        if (u < 0) throw MeshError("point location left the triangulation");
        t = u;
        moved = true;
        break;
      }
    }
    if (moved) continue;
    Location loc;
    loc.tri = t;
    int zeros = 0, z0 = -1, z1 = -1;
    for (int i = 0; i < 3; ++i)
      if (o[static_cast<std::size_t>(i)] == 0.0) {
        (zeros == 0 ? z0 : z1) = i;
        ++zeros;
      }
    if (zeros == 0) {
      loc.where = Where::inside;
    } else if (zeros == 1) {
      loc.where = Where::on_edge;
      loc.index = z0;
    } else {
      loc.where = Where::on_vertex;
      loc.index = 3 - z0 - z1;
    }
    return loc;
  }
  throw MeshError("point location did not terminate");
}

Cdt::Blocked Cdt::walk_blocked(int from, const Vec2& p, int& found) {
  const Tri& F = tris_[static_cast<std::size_t>(from)];
  const Vec2 o = (pts_[static_cast<std::size_t>(F.v[0])] + pts_[static_cast<std::size_t>(F.v[1])] +
                  pts_[static_cast<std::size_t>(F.v[2])]) /
                 3.0;
  int t = from;
  const std::size_t cap = 4 * tris_.size() + 64;
  for (std::size_t step = 0; step < cap; ++step) {
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    int exit = -1, fallback = -1;
    for (int i = 0; i < 3; ++i) {
      const Vec2& a = pts_[static_cast<std::size_t>(T.v[static_cast<std::size_t>(nxt(i))])];
      const Vec2& b = pts_[static_cast<std::size_t>(T.v[static_cast<std::size_t>(prv(i))])];
      if (orient2d(a, b, p) < 0.0) {
        if (fallback < 0) fallback = i;
        const double sa = orient2d(o, p, a), sb = orient2d(o, p, b);
        if ((sa >= 0.0 && sb <= 0.0) || (sa <= 0.0 && sb >= 0.0)) {
          exit = i;
          break;
        }
      }
    }
    if (fallback < 0) {
      found = t;
      return {};
    }
    if (exit < 0) exit = fallback;
    const int a = T.v[static_cast<std::size_t>(nxt(exit))];
    const int b = T.v[static_cast<std::size_t>(prv(exit))];
    if ((T.con >> exit) & 1u) return {a, b};
    const int u = T.n[static_cast<std::size_t>(exit)];
    if (u < 0) return {a, b};
    t = u;
  }
  throw MeshError("directed walk did not terminate");
}

Cdt::Cavity Cdt::build_cavity(const Vec2& p, const Location& loc) {
  if (stamp_.size() < tris_.size()) stamp_.resize(tris_.size(), 0);
  const std::uint32_t gen = ++stamp_gen_;
  Cavity cav;
  int sa = -1, sb = -1;
  cav.tris.push_back(loc.tri);
  stamp_[static_cast<std::size_t>(loc.tri)] = gen;
  if (loc.where == Where::on_edge) {
    const Tri& T = tris_[static_cast<std::size_t>(loc.tri)];
    sa = T.v[static_cast<std::size_t>(nxt(loc.index))];
    sb = T.v[static_cast<std::size_t>(prv(loc.index))];
    const int u = T.n[static_cast<std::size_t>(loc.index)];
    if (u >= 0) {
      cav.tris.push_back(u);
      stamp_[static_cast<std::size_t>(u)] = gen;
    }
  }
  auto is_split = [&](int a, int b) { return sa >= 0 && ((a == sa && b == sb) || (a == sb && b == sa)); };
  for (std::size_t k = 0; k < cav.tris.size(); ++k) {
    const Tri& T = tris_[static_cast<std::size_t>(cav.tris[k])];
    for (int i = 0; i < 3; ++i) {
      const int u = T.n[static_cast<std::size_t>(i)];
      if (u < 0 || stamp_[static_cast<std::size_t>(u)] == gen) continue;
      if ((T.con >> i) & 1u) continue;
      const Tri& U = tris_[static_cast<std::size_t>(u)];
      if (incircle(pts_[static_cast<std::size_t>(U.v[0])], pts_[static_cast<std::size_t>(U.v[1])],
                   pts_[static_cast<std::size_t>(U.v[2])], p) > 0.0) {
        stamp_[static_cast<std::size_t>(u)] = gen;
        cav.tris.push_back(u);
      }
    }
  }
  for (const int t : cav.tris) {
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      const int a = T.v[static_cast<std::size_t>(nxt(i))];
      const int b = T.v[static_cast<std::size_t>(prv(i))];
      const int u = T.n[static_cast<std::size_t>(i)];
      const bool con = (T.con >> i) & 1u;
      if (is_split(a, b)) continue;
      if (u >= 0 && stamp_[static_cast<std::size_t>(u)] == gen) {
        if (con) throw MeshError("cavity swallowed a constrained edge");
        continue;
      }
      if (orient2d(pts_[static_cast<std::size_t>(a)], pts_[static_cast<std::size_t>(b)], p) <= 0.0)
        throw MeshError("insertion cavity is not star-shaped");
      cav.boundary.push_back({a, b, u, con});
    }
  }
  return cav;
}

int Cdt::fill_cavity(int vid, const Cavity& cav, int split_a, int split_b, std::vector<int>* created) {
  for (const int t : cav.tris) kill(t);
  std::vector<std::pair<int, int>> fan;  // (a, new triangle) for boundary edge (a, b)
  fan.reserve(cav.boundary.size());
  auto on_split = [&](int x) { return split_a >= 0 && (x == split_a || x == split_b); };
  for (const auto& e : cav.boundary) {
    const int nt = new_tri(vid, e.a, e.b);
    Tri& N = tris_[static_cast<std::size_t>(nt)];
    if (e.con) N.con |= 1u;
    if (on_split(e.b)) N.con |= 2u;
    if (on_split(e.a)) N.con |= 4u;
    N.n[0] = e.outside;
    if (e.outside >= 0) {
      const int j = edge_slot(e.outside, e.b, e.a);
      if (j < 0) throw MeshError("cavity boundary adjacency corrupted");
      tris_[static_cast<std::size_t>(e.outside)].n[static_cast<std::size_t>(j)] = nt;
    }
    fan.emplace_back(e.a, nt);
    if (created) created->push_back(nt);
  }
  for (const auto& [a, nt] : fan) {
    const int b = tris_[static_cast<std::size_t>(nt)].v[2];
    for (const auto& [a2, nt2] : fan)
      if (a2 == b) {
        tris_[static_cast<std::size_t>(nt)].n[1] = nt2;
        tris_[static_cast<std::size_t>(nt2)].n[2] = nt;
        break;
      }
  }
  last_ = fan.empty() ? last_ : fan.front().second;
  return vid;
}

int Cdt::insert_at(const Vec2& p, const Location& loc, bool input, std::vector<int>* created) {
  const Tri& T = tris_[static_cast<std::size_t>(loc.tri)];
  if (loc.where == Where::on_vertex) return T.v[static_cast<std::size_t>(loc.index)];
  const int vid = static_cast<int>(pts_.size());
  int split_a = -1, split_b = -1;
  SegmentTag tag;
  if (loc.where == Where::on_edge && ((T.con >> loc.index) & 1u)) {
    split_a = T.v[static_cast<std::size_t>(nxt(loc.index))];
    split_b = T.v[static_cast<std::size_t>(prv(loc.index))];
    auto it = tags_.find(key(split_a, split_b));
    if (it != tags_.end()) {
      tag = it->second;
      tags_.erase(it);
    }
  }
  const Cavity cav = build_cavity(p, loc);
  pts_.push_back(p);
  input_.push_back(input ? 1 : 0);
  vtri_.push_back(-1);
  fill_cavity(vid, cav, split_a, split_b, created);
  if (split_a >= 0) {
    tags_[key(split_a, vid)] = tag;
    tags_[key(vid, split_b)] = tag;
  }
  return vid;
}

int Cdt::add_vertex(const Vec2& p, bool input) {
  const Location loc = locate(p, last_);
  const int v = insert_at(p, loc, input);
  if (input) input_[static_cast<std::size_t>(v)] = 1;
  return v;
}

void Cdt::flip(int t, int i) {
  const Tri T = tris_[static_cast<std::size_t>(t)];
  const int p0 = T.v[static_cast<std::size_t>(i)];
  const int s1 = T.v[static_cast<std::size_t>(nxt(i))];
  const int s2 = T.v[static_cast<std::size_t>(prv(i))];
  const int u = T.n[static_cast<std::size_t>(i)];
  const Tri U = tris_[static_cast<std::size_t>(u)];
  const int j = edge_slot(u, s2, s1);
  const int q = U.v[static_cast<std::size_t>(j)];

  const int n_s1q = U.n[static_cast<std::size_t>(nxt(j))];
  const bool c_s1q = (U.con >> nxt(j)) & 1u;
  const int n_qs2 = U.n[static_cast<std::size_t>(prv(j))];
  const bool c_qs2 = (U.con >> prv(j)) & 1u;
  const int n_s2p = T.n[static_cast<std::size_t>(nxt(i))];
  const bool c_s2p = (T.con >> nxt(i)) & 1u;
  const int n_ps1 = T.n[static_cast<std::size_t>(prv(i))];
  const bool c_ps1 = (T.con >> prv(i)) & 1u;

  Tri& A = tris_[static_cast<std::size_t>(t)];
  A.v = {p0, s1, q};
  A.con = static_cast<std::uint8_t>((c_s1q ? 1u : 0u) | (c_ps1 ? 4u : 0u));
  A.n = {-1, u, -1};
  Tri& B = tris_[static_cast<std::size_t>(u)];
  B.v = {p0, q, s2};
  B.con = static_cast<std::uint8_t>((c_qs2 ? 1u : 0u) | (c_s2p ? 2u : 0u));
  B.n = {-1, -1, t};
  set_neighbor(t, 0, n_s1q);
  set_neighbor(t, 2, n_ps1);
  set_neighbor(u, 0, n_qs2);
  set_neighbor(u, 1, n_s2p);
  for (const int v : {p0, s1}) vtri_[static_cast<std::size_t>(v)] = t;
  for (const int v : {q, s2}) vtri_[static_cast<std::size_t>(v)] = u;
  last_ = t;
}

bool Cdt::edge_crosses(int a, int b, int x, int y) const {
  const Vec2 &pa = pts_[static_cast<std::size_t>(a)], &pb = pts_[static_cast<std::size_t>(b)];
  const Vec2 &px = pts_[static_cast<std::size_t>(x)], &py = pts_[static_cast<std::size_t>(y)];
  const double o1 = orient2d(pa, pb, px), o2 = orient2d(pa, pb, py);
  if (o1 == 0.0 || o2 == 0.0 || (o1 > 0.0) == (o2 > 0.0)) return false;
  const double o3 = orient2d(px, py, pa), o4 = orient2d(px, py, pb);
  return o3 != 0.0 && o4 != 0.0 && (o3 > 0.0) != (o4 > 0.0);
}

void Cdt::legalize(std::vector<std::array<int, 2>> edges) {
  std::size_t guard = 0;
  while (!edges.empty()) {
    if (++guard > 100 * tris_.size() + 1000) throw MeshError("edge legalization did not terminate");
    const auto [x, y] = edges.back();
    edges.pop_back();
    int t, i;
    if (!find_edge(x, y, t, i) && !find_edge(y, x, t, i)) continue;
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    if ((T.con >> i) & 1u) continue;
    const int u = T.n[static_cast<std::size_t>(i)];
    if (u < 0) continue;
    const int p0 = T.v[static_cast<std::size_t>(i)];
    const int s1 = T.v[static_cast<std::size_t>(nxt(i))];
    const int s2 = T.v[static_cast<std::size_t>(prv(i))];
    const int j = edge_slot(u, s2, s1);
    const int q = tris_[static_cast<std::size_t>(u)].v[static_cast<std::size_t>(j)];
    if (incircle(pts_[static_cast<std::size_t>(p0)], pts_[static_cast<std::size_t>(s1)],
                 pts_[static_cast<std::size_t>(s2)], pts_[static_cast<std::size_t>(q)]) <= 0.0)
      continue;
    flip(t, i);
    edges.push_back({s1, q});
    edges.push_back({q, s2});
    edges.push_back({s2, p0});
    edges.push_back({p0, s1});
  }
}

void Cdt::insert_segment(int a, int b, const SegmentTag& tag) {
  if (a == b) return;
  auto mark = [&](int x, int y) {
    int t, i;
    if (find_edge(x, y, t, i)) {
      tris_[static_cast<std::size_t>(t)].con |= static_cast<std::uint8_t>(1u << i);
      const int u = tris_[static_cast<std::size_t>(t)].n[static_cast<std::size_t>(i)];
      if (u >= 0) tris_[static_cast<std::size_t>(u)].con |= static_cast<std::uint8_t>(1u << edge_slot(u, y, x));
      return true;
    }
    return false;
  };
  auto record = [&](int x, int y) {
    auto [it, fresh] = tags_.try_emplace(key(x, y), tag);
    if (!fresh) it->second.merge(tag);
  };
  if (mark(a, b) || mark(b, a)) {
    record(a, b);
    return;
  }

  const Vec2 pa = pts_[static_cast<std::size_t>(a)];
  const Vec2 pb = pts_[static_cast<std::size_t>(b)];

  // Find the triangle around a through which the segment leaves.
  int start = -1;
  {
    int t0, i0;
    (void)t0;
    (void)i0;
    int first = vtri_[static_cast<std::size_t>(a)];
    int cur = first;
    std::size_t guard = 0;
    while (true) {
      if (++guard > tris_.size() + 8) throw MeshError("vertex fan traversal failed");
      const Tri& T = tris_[static_cast<std::size_t>(cur)];
      const int ia = T.v[0] == a ? 0 : (T.v[1] == a ? 1 : 2);
      const int x = T.v[static_cast<std::size_t>(nxt(ia))];
      const int y = T.v[static_cast<std::size_t>(prv(ia))];
      const Vec2& px = pts_[static_cast<std::size_t>(x)];
      const Vec2& py = pts_[static_cast<std::size_t>(y)];
      const double ox = orient2d(pa, px, pb);
      const double oy = orient2d(pa, py, pb);
      if (ox == 0.0 && dot(px - pa, pb - pa) > 0.0) {
        insert_segment(a, x, tag);
        insert_segment(x, b, tag);
        return;
      }
      if (oy == 0.0 && dot(py - pa, pb - pa) > 0.0) {
        insert_segment(a, y, tag);
        insert_segment(y, b, tag);
        return;
      }
      if (ox > 0.0 && oy < 0.0) {
        start = cur;
        break;
      }
      const int nx = T.n[static_cast<std::size_t>(nxt(ia))];
      if (nx < 0) throw MeshError("segment recovery reached the hull");
      cur = nx;
      if (cur == first) throw MeshError("segment recovery found no exit triangle");
    }
  }

  // Collect the edges crossed by the segment.
  std::deque<std::array<int, 2>> crossing;
  {
    int t = start;
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    const int ia = T.v[0] == a ? 0 : (T.v[1] == a ? 1 : 2);
    int r = T.v[static_cast<std::size_t>(nxt(ia))];
    int l = T.v[static_cast<std::size_t>(prv(ia))];
    int edge = ia;
    std::size_t guard = 0;
    while (true) {
      if (++guard > tris_.size() + 8) throw MeshError("segment walk did not terminate");
      const Tri& C = tris_[static_cast<std::size_t>(t)];
      if ((C.con >> edge) & 1u)
        throw MeshError("constraint-edge recovery failure: segment (" + std::to_string(pa.x) + ", " +
                        std::to_string(pa.y) + ")-(" + std::to_string(pb.x) + ", " + std::to_string(pb.y) +
                        ") crosses an existing constraint");
      crossing.push_back({l, r});
      const int u = C.n[static_cast<std::size_t>(edge)];
      if (u < 0) throw MeshError("segment walk left the triangulation");
      const int j = edge_slot(u, C.v[static_cast<std::size_t>(prv(edge))], C.v[static_cast<std::size_t>(nxt(edge))]);
      const int q = tris_[static_cast<std::size_t>(u)].v[static_cast<std::size_t>(j)];
      if (q == b) break;
      const double oq = orient2d(pa, pb, pts_[static_cast<std::size_t>(q)]);
      if (oq == 0.0) {
        insert_segment(a, q, tag);
        insert_segment(q, b, tag);
        return;
      }
      if (oq > 0.0)
        l = q;
      else
        r = q;
      t = u;
      edge = edge_slot(t, r, l);
      if (edge < 0) edge = edge_slot(t, l, r);
      if (edge < 0) throw MeshError("segment walk lost its crossing edge");
    }
  }

  // Flip crossing edges away.
  std::vector<std::array<int, 2>> fresh;
  std::size_t guard = 0;
  const std::size_t limit = 64 * (crossing.size() + 4) * (crossing.size() + 4);
  while (!crossing.empty()) {
    if (++guard > limit) throw MeshError("constraint-edge recovery failure: flipping did not converge");
    const auto [x, y] = crossing.front();
    crossing.pop_front();
    int t, i;
    if (!find_edge(x, y, t, i) && !find_edge(y, x, t, i)) continue;
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    const int u = T.n[static_cast<std::size_t>(i)];
    const int p0 = T.v[static_cast<std::size_t>(i)];
    const int s1 = T.v[static_cast<std::size_t>(nxt(i))];
    const int s2 = T.v[static_cast<std::size_t>(prv(i))];
    const int j = edge_slot(u, s2, s1);
    const int q = tris_[static_cast<std::size_t>(u)].v[static_cast<std::size_t>(j)];
    const double o1 = orient2d(pts_[static_cast<std::size_t>(p0)], pts_[static_cast<std::size_t>(q)],
                               pts_[static_cast<std::size_t>(s1)]);
    const double o2 = orient2d(pts_[static_cast<std::size_t>(p0)], pts_[static_cast<std::size_t>(q)],
                               pts_[static_cast<std::size_t>(s2)]);
    if (!(o1 < 0.0 && o2 > 0.0)) {
      crossing.push_back({x, y});
      continue;
    }
    flip(t, i);
    if (edge_crosses(a, b, p0, q))
      crossing.push_back({p0, q});
    else if (!((p0 == a && q == b) || (p0 == b && q == a)))
      fresh.push_back({p0, q});
  }
  if (!mark(a, b) && !mark(b, a)) throw MeshError("constraint-edge recovery failure: segment missing after flips");
  record(a, b);
  legalize(std::move(fresh));
}

const SegmentTag* Cdt::tag(int a, int b) const {
  auto it = tags_.find(key(a, b));
  return it == tags_.end() ? nullptr : &it->second;
}

void Cdt::remove_exterior() {
  if (stamp_.size() < tris_.size()) stamp_.resize(tris_.size(), 0);
  const std::uint32_t gen = ++stamp_gen_;
  std::vector<int> stack;
  for (std::size_t t = 0; t < tris_.size(); ++t) {
    const Tri& T = tris_[t];
    if (T.alive && (T.v[0] < 3 || T.v[1] < 3 || T.v[2] < 3)) {
      stamp_[t] = gen;
      stack.push_back(static_cast<int>(t));
    }
  }
  std::vector<int> doomed;
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    doomed.push_back(t);
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      const int u = T.n[static_cast<std::size_t>(i)];
      if (u < 0 || stamp_[static_cast<std::size_t>(u)] == gen || ((T.con >> i) & 1u)) continue;
      stamp_[static_cast<std::size_t>(u)] = gen;
      stack.push_back(u);
    }
  }
  std::sort(doomed.begin(), doomed.end());
  for (const int t : doomed) {
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      const int u = T.n[static_cast<std::size_t>(i)];
      if (u >= 0 && stamp_[static_cast<std::size_t>(u)] != gen) {
        const int j = edge_slot(u, T.v[static_cast<std::size_t>(prv(i))], T.v[static_cast<std::size_t>(nxt(i))]);
        tris_[static_cast<std::size_t>(u)].n[static_cast<std::size_t>(j)] = -1;
      }
    }
  }
  for (const int t : doomed) kill(t);
  std::fill(vtri_.begin(), vtri_.end(), -1);
  for (std::size_t t = 0; t < tris_.size(); ++t)
    if (tris_[t].alive)
      for (const int v : tris_[t].v) vtri_[static_cast<std::size_t>(v)] = static_cast<int>(t);
  for (std::size_t t = 0; t < tris_.size(); ++t)
    if (tris_[t].alive) {
      last_ = static_cast<int>(t);
      break;
    }
}

// ---------------------------------------------------------------------------
// Refinement

bool Cdt::encroached(int a, int b, const Vec2& p) const {
  return dot(pts_[static_cast<std::size_t>(a)] - p, pts_[static_cast<std::size_t>(b)] - p) < 0.0;
}

bool Cdt::segment_encroached(int a, int b) const {
  for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
    int t, i;
    if (!find_edge(x, y, t, i)) continue;
    const int apex = tris_[static_cast<std::size_t>(t)].v[static_cast<std::size_t>(i)];
    if (encroached(a, b, pts_[static_cast<std::size_t>(apex)])) return true;
  }
  return false;
}

Vec2 Cdt::split_point(int a, int b, const SegmentTag& tag) const {
  const Vec2& pa = pts_[static_cast<std::size_t>(a)];
  const Vec2& pb = pts_[static_cast<std::size_t>(b)];
  if (tag.orig_a < 0) return 0.5 * (pa + pb);
  const Vec2 A = pts_[static_cast<std::size_t>(tag.orig_a)];
  const Vec2 D = pts_[static_cast<std::size_t>(tag.orig_b)] - A;
  const double dl = norm(D);
  const double sa = dot(pa - A, D) / (dl * dl);
  const double sb = dot(pb - A, D) / (dl * dl);
  double s = 0.5 * (sa + sb);
  const bool ia = is_input(a), ib = is_input(b);
  if (ia != ib) {
    // Concentric shells around the input vertex.
    const double len = std::abs(sb - sa) * dl;
    const double d = std::exp2(std::round(std::log2(0.5 * len)));
    if (d > 0.25 * len && d < 0.75 * len) {
      const double from = ia ? sa : sb;
      const double to = ia ? sb : sa;
      s = from + (to > from ? 1.0 : -1.0) * d / dl;
    }
  }
  return A + s * D;
}

int Cdt::split_segment(int a, int b, std::vector<int>* created) {
  int t, i;
  if (!find_edge(a, b, t, i) && !find_edge(b, a, t, i)) return -1;
  const SegmentTag* tg = tag(a, b);
  const Vec2 p = split_point(a, b, tg ? *tg : SegmentTag{});
  Location loc;
  loc.tri = t;
  loc.where = Where::on_edge;
  loc.index = i;
  return insert_at(p, loc, false, created);
}

void Cdt::refine(const RefineParams& params) {
  const double theta = params.min_angle_deg * std::numbers::pi / 180.0;

  auto is_bad = [&](int t) {
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    const Vec2& p0 = pts_[static_cast<std::size_t>(T.v[0])];
    const Vec2& p1 = pts_[static_cast<std::size_t>(T.v[1])];
    const Vec2& p2 = pts_[static_cast<std::size_t>(T.v[2])];
    const double l0 = norm2(p2 - p1), l1 = norm2(p0 - p2), l2 = norm2(p1 - p0);
    const double longest = std::sqrt(std::max({l0, l1, l2}));
    if (params.size && longest > params.size(p0, p1, p2)) return true;
    if (!params.quality) return false;
    const std::array<Vec2, 3> p{p0, p1, p2};
    double best = 10.0;
    int at = 0;
    for (int k = 0; k < 3; ++k) {
      const Vec2 u = p[static_cast<std::size_t>(nxt(k))] - p[static_cast<std::size_t>(k)];
      const Vec2 w = p[static_cast<std::size_t>(prv(k))] - p[static_cast<std::size_t>(k)];
      const double ang = std::atan2(std::abs(cross(u, w)), dot(u, w));
      if (ang < best) {
        best = ang;
        at = k;
      }
    }
    if (best >= theta) return false;
    // Angles between two constraints cannot be improved by refinement.
    if (((T.con >> nxt(at)) & 1u) && ((T.con >> prv(at)) & 1u)) return false;
    return true;
  };

  std::deque<std::pair<int, std::array<int, 3>>> triq;
  std::deque<std::array<int, 2>> segq;
  auto push_tri = [&](int t) {
    if (is_bad(t)) triq.emplace_back(t, tris_[static_cast<std::size_t>(t)].v);
  };
  auto push_segments_of = [&](int t) {
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i)
      if ((T.con >> i) & 1u) segq.push_back({T.v[static_cast<std::size_t>(nxt(i))], T.v[static_cast<std::size_t>(prv(i))]});
  };
  std::vector<int> created;
  auto after_insert = [&]() {
    for (const int t : created) {
      push_tri(t);
      if (params.quality) push_segments_of(t);
    }
    created.clear();
  };

  for (std::size_t t = 0; t < tris_.size(); ++t)
    if (tris_[t].alive) {
      push_tri(static_cast<int>(t));
      if (params.quality) push_segments_of(static_cast<int>(t));
    }

  while (true) {
    if (pts_.size() > params.max_vertices)
      throw MeshError("refinement exceeded " + std::to_string(params.max_vertices) + " vertices");
    if (!segq.empty()) {
      const auto [a, b] = segq.front();
      segq.pop_front();
      int t, i;
      if (!find_edge(a, b, t, i) && !find_edge(b, a, t, i)) continue;
      if (!((tris_[static_cast<std::size_t>(t)].con >> i) & 1u)) continue;
      if (segment_encroached(a, b)) {
        split_segment(a, b, &created);
        after_insert();
      }
      continue;
    }
    if (triq.empty()) break;
    const auto [t, verts] = triq.front();
    triq.pop_front();
    const Tri& T = tris_[static_cast<std::size_t>(t)];
    if (!T.alive || T.v != verts || !is_bad(t)) continue;
    const Vec2 c = circumcenter(pts_[static_cast<std::size_t>(T.v[0])], pts_[static_cast<std::size_t>(T.v[1])],
                                pts_[static_cast<std::size_t>(T.v[2])]);
    int found = -1;
    const Blocked bl = walk_blocked(t, c, found);
    if (bl.a >= 0) {
      split_segment(bl.a, bl.b, &created);
      after_insert();
      triq.emplace_back(t, verts);
      continue;
    }
    const Location loc = locate(c, found);
    if (loc.where == Where::on_vertex) continue;
    const Tri& L = tris_[static_cast<std::size_t>(loc.tri)];
    if (loc.where == Where::on_edge && ((L.con >> loc.index) & 1u)) {
      split_segment(L.v[static_cast<std::size_t>(nxt(loc.index))], L.v[static_cast<std::size_t>(prv(loc.index))],
                    &created);
      after_insert();
      triq.emplace_back(t, verts);
      continue;
    }
    const Cavity cav = build_cavity(c, loc);
    std::vector<std::array<int, 2>> enc;
    for (const auto& e : cav.boundary)
      if (e.con && encroached(e.a, e.b, c)) enc.push_back({e.a, e.b});
    if (!enc.empty()) {
      for (const auto& [a, b] : enc) split_segment(a, b, &created);
      after_insert();
      triq.emplace_back(t, verts);
      continue;
    }
    insert_at(c, loc, false, &created);
    after_insert();
  }
}

}  // namespace polyeit::detail
