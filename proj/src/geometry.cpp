#include "polyeit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "polyeit/errors.hpp"

namespace polyeit {

namespace {

double signed_area_of(const std::vector<Vec2>& pts) {
  double a = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(pts[i], pts[(i + 1) % n]);
  return 0.5 * a;
}

int orientation_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({norm2(b - a), norm2(c - a), 1e-300});
  if (std::abs(v) <= 1e-14 * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::min(a.x, b.x) - 1e-15 <= p.x && p.x <= std::max(a.x, b.x) + 1e-15 &&
         std::min(a.y, b.y) - 1e-15 <= p.y && p.y <= std::max(a.y, b.y) + 1e-15;
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation_sign(p1, p2, q1);
  const int o2 = orientation_sign(p1, p2, q2);
  const int o3 = orientation_sign(q1, q2, p1);
  const int o4 = orientation_sign(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// DomainSpec

DomainSpec DomainSpec::unit_square(double margin) {
  DomainSpec d;
  d.kind = Kind::unit_square;
  d.sides = 4;
  d.radius = std::sqrt(2.0);
  d.diameter_bound = 2.0 * std::sqrt(2.0);
  d.margin = margin;
  return d;
}

DomainSpec DomainSpec::regular_ngon(int sides, double radius, double margin) {
  DomainSpec d;
  d.kind = Kind::regular_ngon;
  d.sides = sides;
  d.radius = radius;
  d.diameter_bound = 2.0 * radius;
  d.margin = margin;
  return d;
}

std::vector<Vec2> DomainSpec::boundary() const {
  if (kind == Kind::unit_square) return {{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}};
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(sides));
  for (int i = 0; i < sides; ++i) {
    const double a = 2.0 * std::numbers::pi * i / sides;
    pts.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return pts;
}

double DomainSpec::area() const { return signed_area_of(boundary()); }

double DomainSpec::perimeter() const {
  const auto b = boundary();
  double p = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) p += distance(b[i], b[(i + 1) % b.size()]);
  return p;
}

double DomainSpec::distance_to_boundary(const Vec2& p) const {
  const auto b = boundary();
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.size(); ++i)
    d = std::min(d, point_segment_distance(p, b[i], b[(i + 1) % b.size()]));
  return d;
}

bool DomainSpec::contains(const Vec2& p) const {
  const auto b = boundary();
  for (std::size_t i = 0; i < b.size(); ++i)
    if (cross(b[(i + 1) % b.size()] - b[i], p - b[i]) < 0.0) return false;
  return true;
}

void DomainSpec::validate() const {
  if (kind == Kind::regular_ngon && sides < 3)
    throw ValidationError("domain: regular_ngon needs at least 3 sides");
  if (!(radius > 0.0)) throw ValidationError("domain: radius must be positive");
  if (!(diameter_bound > 0.0)) throw ValidationError("domain: diameter bound L must be positive");
  if (!(margin > 0.0 && margin < 0.5 * diameter_bound))
    throw ValidationError("domain: margin d0 must satisfy 0 < d0 < L/2");
}

// ---------------------------------------------------------------------------
// Polygon

Polygon::Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
  for (const auto& p : vertices_)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw GeometryError("polygon has non-finite vertex coordinates");
  const double sa = signed_area_of(vertices_);
  const double d = diameter();
  if (!(std::abs(sa) > 1e-14 * d * d)) throw GeometryError("polygon has zero area (collinear vertices)");
  if (sa > 0.0) {
    std::reverse(vertices_.begin(), vertices_.end());
    // Keep the caller's first vertex first.
    std::rotate(vertices_.rbegin(), vertices_.rbegin() + 1, vertices_.rend());
    reversed_ = true;
  }
  if (!is_simple()) throw GeometryError("polygon is not simple (self-intersecting)");
}

double Polygon::signed_area() const { return signed_area_of(vertices_); }

double Polygon::perimeter() const {
  double p = 0.0;
  for (std::size_t i = 0; i < size(); ++i) p += edge_length(i);
  return p;
}

Vec2 Polygon::centroid() const {
  const double a = signed_area();
  Vec2 c;
  for (std::size_t i = 0; i < size(); ++i) {
    const Vec2& p = vertices_[i];
    const Vec2& q = vertex(i + 1);
    const double w = cross(p, q);
    c += (p + q) * w;
  }
  return c / (6.0 * a);
}

double Polygon::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = i + 1; j < size(); ++j) d = std::max(d, distance(vertices_[i], vertices_[j]));
  return d;
}

double Polygon::edge_length(std::size_t i) const { return distance(vertex(i), vertex(i + 1)); }

double Polygon::min_edge_length() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) m = std::min(m, edge_length(i));
  return m;
}

double Polygon::interior_angle(std::size_t i) const {
  const std::size_t n = size();
  const Vec2& p = vertices_[i % n];
  const Vec2 a = vertex(i + n - 1) - p;
  const Vec2 b = vertex(i + 1) - p;
  const double ang = std::atan2(std::abs(cross(a, b)), dot(a, b));
  // Clockwise storage: a convex vertex turns right.
  const double turn = cross(p - vertex(i + n - 1), vertex(i + 1) - p);
  return turn <= 0.0 ? ang : 2.0 * std::numbers::pi - ang;
}

bool Polygon::is_convex() const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    const double turn = cross(vertex(i + 1) - vertex(i), vertex(i + 2) - vertex(i + 1));
    if (turn > 0.0) return false;
  }
  return true;
}

bool Polygon::is_simple() const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    if (edge_length(i) == 0.0) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Adjacent edges may only share their common vertex: reject folding back.
        const std::size_t shared = (j == i + 1) ? j : i;
        const Vec2 a = vertex(shared + n - 1) - vertex(shared);
        const Vec2 b = vertex(shared + 1) - vertex(shared);
        if (std::abs(cross(a, b)) <= 1e-14 * norm(a) * norm(b) && dot(a, b) > 0.0) return false;
        continue;
      }
      if (segments_intersect(vertex(i), vertex(i + 1), vertex(j), vertex(j + 1))) return false;
    }
  }
  return true;
}

bool Polygon::contains(const Vec2& p, double tol) const {
  if (tol > 0.0 && boundary_distance(p) <= tol) return true;
  bool inside = false;
  const std::size_t n = size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double Polygon::boundary_distance(const Vec2& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) d = std::min(d, point_segment_distance(p, vertex(i), vertex(i + 1)));
  return d;
}

Polygon Polygon::relabeled(std::size_t start) const {
  std::vector<Vec2> v(vertices_);
  std::rotate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(start % v.size()), v.end());
  return Polygon(std::move(v));
}

// ---------------------------------------------------------------------------
// Admissibility

void ConstraintParams::validate() const {
  if (!(alpha0 > 0.0 && alpha0 < 0.5 * std::numbers::pi))
    throw ValidationError("constraints: alpha0 must lie in (0, pi/2)");
  if (!(alpha1 > 0.0)) throw ValidationError("constraints: alpha1 must be positive");
  if (!(d0 > 0.0)) throw ValidationError("constraints: d0 must be positive");
}

bool AdmissibilityReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::string AdmissibilityReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.pass) return c.name;
  return {};
}

std::string AdmissibilityReport::describe() const {
  std::ostringstream os;
  for (const auto& c : checks)
    os << c.name << ": " << (c.pass ? "pass" : "FAIL") << " (margin " << c.margin << ")"
       << (c.detail.empty() ? "" : " " + c.detail) << "\n";
  return os.str();
}

AdmissibilityReport validate_constraints(const Polygon& poly, const ConstraintParams& params,
                                         const DomainSpec& dom) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly.vertex(i + n - 1) - poly.vertex(i);
    const Vec2 b = poly.vertex(i + 1) - poly.vertex(i);
    if (std::abs(cross(a, b)) <= 1e-12 * norm(a) * norm(b))
      throw GeometryError("degenerate polygon: vertices " + std::to_string((i + n - 1) % n) + ", " +
                          std::to_string(i) + ", " + std::to_string((i + 1) % n) + " are collinear");
  }

  AdmissibilityReport rep;

  {
    ConstraintCheck c{"side", true, std::numeric_limits<double>::infinity(), {}};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double m = distance(poly[i], poly[j]) - params.alpha1;
        if (m < c.margin) {
          c.margin = m;
          c.detail = "closest pair (" + std::to_string(i) + ", " + std::to_string(j) + ")";
        }
      }
    c.pass = c.margin >= 0.0;
    rep.checks.push_back(c);
  }
  {
    ConstraintCheck c{"angle", true, std::numeric_limits<double>::infinity(), {}};
    for (std::size_t i = 0; i < n; ++i) {
      const double th = poly.interior_angle(i);
      const double m = std::min(th - params.alpha0, std::numbers::pi - params.alpha0 - th);
      if (m < c.margin) {
        c.margin = m;
        c.detail = "vertex " + std::to_string(i);
      }
    }
    c.pass = c.margin >= 0.0;
    rep.checks.push_back(c);
  }
  {
    ConstraintCheck c{"margin", true, std::numeric_limits<double>::infinity(), {}};
    for (std::size_t i = 0; i < n; ++i) {
      double d = dom.distance_to_boundary(poly[i]);
      if (!dom.contains(poly[i])) d = -d;
      const double m = d - params.d0;
      if (m < c.margin) {
        c.margin = m;
        c.detail = "vertex " + std::to_string(i);
      }
    }
    c.pass = c.margin >= 0.0;
    rep.checks.push_back(c);
  }
  {
    ConstraintCheck c{"convexity", poly.is_convex(), 0.0, {}};
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) worst = std::min(worst, std::numbers::pi - poly.interior_angle(i));
    c.margin = worst;
    rep.checks.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Velocities and perturbation

double VelocityField::max_norm() const {
  double m = 0.0;
  for (const auto& w : v) m = std::max(m, norm(w));
  return m;
}

double VelocityField::l2_norm() const {
  double s = 0.0;
  for (const auto& w : v) s += norm2(w);
  return std::sqrt(s);
}

VelocityField VelocityField::scaled(double s) const {
  VelocityField r(v);
  for (auto& w : r.v) w *= s;
  return r;
}

VelocityField operator+(const VelocityField& a, const VelocityField& b) {
  if (a.size() != b.size()) throw GeometryError("velocity fields differ in length");
  VelocityField r(a.v);
  for (std::size_t i = 0; i < r.size(); ++i) r.v[i] += b.v[i];
  return r;
}

Polygon perturb(const Polygon& poly, const VelocityField& V, double t) {
  if (V.size() != poly.size())
    throw GeometryError("velocity field has " + std::to_string(V.size()) + " entries for a polygon of " +
                        std::to_string(poly.size()) + " vertices");
  std::vector<Vec2> pts(poly.vertices());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(V[i].x) || !std::isfinite(V[i].y)) throw GeometryError("velocity is not finite");
    pts[i] += t * V[i];
  }
  if (signed_area_of(pts) >= 0.0) throw GeometryError("perturb: orientation flipped (simplicity)");
  Polygon out = [&] {
    try {
      return Polygon(std::move(pts));
    } catch (const GeometryError& e) {
      throw GeometryError(std::string("perturb: simplicity violated: ") + e.what());
    }
  }();
  if (out.size() >= 4 && !out.is_convex()) throw GeometryError("perturb: convexity violated");
  return out;
}

double admissible_t_bound(const VelocityField& V, double d0) {
  const double m = V.max_norm();
  return m > 0.0 ? d0 / (2.0 * m) : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Frames and interface velocity

EdgeFrame edge_frame(const Polygon& poly, std::size_t i) {
  if (i >= poly.size()) throw GeometryError("edge index " + std::to_string(i) + " out of range");
  EdgeFrame f;
  f.edge = i;
  f.start = poly.vertex(i);
  f.end = poly.vertex(i + 1);
  const Vec2 d = f.end - f.start;
  f.length = norm(d);
  if (!(f.length > 0.0)) throw GeometryError("zero-length edge " + std::to_string(i));
  f.tangent = d / f.length;
  // Clockwise traversal keeps the interior on the right, so the outward
  // normal is the left-hand (counter-clockwise) rotation of the tangent.
  f.normal = perp(f.tangent);
  return f;
}

double edge_parameter(const Polygon& poly, std::size_t i, const Vec2& q) {
  const Vec2 a = poly.vertex(i);
  const Vec2 d = poly.vertex(i + 1) - a;
  return dot(q - a, d) / norm2(d);
}

Vec2 interface_velocity(const Polygon& poly, const VelocityField& V, std::size_t i, const Vec2& q) {
  if (i >= poly.size()) throw GeometryError("edge index out of range");
  if (V.size() != poly.size()) throw GeometryError("velocity field length mismatch");
  const Vec2 a = poly.vertex(i);
  const Vec2 b = poly.vertex(i + 1);
  const double len = distance(a, b);
  const double off = point_segment_distance(q, a, b);
  if (off > kOnEdgeTolerance * len)
    throw GeometryError("point is " + std::to_string(off) + " away from edge " + std::to_string(i));
  const double s = edge_parameter(poly, i, q);
  const Vec2& vi = V[i];
  const Vec2& vj = V[(i + 1) % V.size()];
  return vi + s * (vj - vi);
}

// ---------------------------------------------------------------------------
// Areas and clipping

double polygon_area(const std::vector<Vec2>& pts) {
  return pts.size() < 3 ? 0.0 : std::abs(signed_area_of(pts));
}

std::vector<Vec2> convex_intersection(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> out = subject;
  const double orient = signed_area_of(clip) >= 0.0 ? 1.0 : -1.0;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % m];
    auto side = [&](const Vec2& p) { return orient * cross(b - a, p - a); };
    std::vector<Vec2> in;
    in.swap(out);
    const std::size_t k = in.size();
    for (std::size_t i = 0; i < k; ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % k];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double s = sp / (sp - sq);
        out.push_back(p + s * (q - p));
      }
    }
  }
  return out;
}

double symmetric_difference_area(const Polygon& a, const Polygon& b) {
  const double inter = polygon_area(convex_intersection(a.vertices(), b.vertices()));
  return std::max(0.0, a.area() + b.area() - 2.0 * inter);
}

// ---------------------------------------------------------------------------
// Hausdorff distance

namespace {

// sup over the boundary of `a` of the distance to the boundary of `b`.
// dist(., b) is 1-Lipschitz along each segment, which bounds the maximum
// on a sub-interval of length l by max(endpoint values) + l / 2.
// Squared distance from x(s) = p + s d to segment [a, b] on a parameter
// interval where the nearest feature does not change: c2 s^2 + c1 s + c0.
struct Quad {
  double c2, c1, c0;
};

// Breakpoints of the nearest-feature regions of [a, b] along the line,
// and the quadratic valid between them.
struct EdgeOnLine {
  Vec2 a, b;
  double s_a, s_b;  // line parameters where the foot passes a and b

  EdgeOnLine(const Vec2& a_, const Vec2& b_, const Vec2& p, const Vec2& d) : a(a_), b(b_) {
    const Vec2 e = b - a;
    const double de = dot(d, e);
    if (de != 0.0) {
      s_a = dot(a - p, e) / de;
      s_b = dot(b - p, e) / de;
    } else {
      s_a = s_b = std::numeric_limits<double>::infinity();
    }
  }

  static Quad to_point(const Vec2& c, const Vec2& p, const Vec2& d) {
    const Vec2 w = p - c;
    return {dot(d, d), 2.0 * dot(w, d), dot(w, w)};
  }

  Quad at(double s, const Vec2& p, const Vec2& d) const {
    const Vec2 e = b - a;
    const double ee = dot(e, e);
    const double u = dot(p + s * d - a, e) / ee;
    if (u <= 0.0) return to_point(a, p, d);
    if (u >= 1.0) return to_point(b, p, d);
    const double n0 = cross(e, p - a), n1 = cross(e, d);
    return {n1 * n1 / ee, 2.0 * n0 * n1 / ee, n0 * n0 / ee};
  }
};

// Exact max over segment [p, q] of the distance to the boundary of b: each
// edge distance is convex along the segment, so the maximum of their minimum
// is at an end or where two edge distances coincide.
double segment_max_distance(const Vec2& p, const Vec2& q, const Polygon& b) {
  const Vec2 d = q - p;
  std::vector<EdgeOnLine> edges;
  for (std::size_t i = 0; i < b.size(); ++i) edges.emplace_back(b.vertex(i), b.vertex(i + 1), p, d);
  std::vector<double> cand{0.0, 1.0};
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      std::vector<double> cuts{0.0, 1.0};
      for (double c : {edges[i].s_a, edges[i].s_b, edges[j].s_a, edges[j].s_b})
        if (c > 0.0 && c < 1.0) cuts.push_back(c);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k], hi = cuts[k + 1];
        if (!(hi > lo)) continue;
        const double mid = 0.5 * (lo + hi);
        const Quad f = edges[i].at(mid, p, d), g = edges[j].at(mid, p, d);
        const double A = f.c2 - g.c2, B = f.c1 - g.c1, C = f.c0 - g.c0;
        const double scale = std::max({std::abs(A), std::abs(B), std::abs(C), 1e-300});
        auto keep = [&](double s) {
          if (s >= lo && s <= hi) cand.push_back(s);
        };
        if (std::abs(A) <= 1e-14 * scale) {
          if (std::abs(B) > 1e-14 * scale) keep(-C / B);
          continue;
        }
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0) continue;
        const double r = std::sqrt(disc);
        const double s1 = (-B - std::copysign(r, B)) / (2.0 * A);
        keep(s1);
        if (s1 != 0.0) keep(C / (A * s1));
      }
    }
  double best = 0.0;
  for (double s : cand) best = std::max(best, b.boundary_distance(p + s * d));
  return best;
}

double directed_hausdorff(const Polygon& a, const Polygon& b) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, segment_max_distance(a.vertex(i), a.vertex(i + 1), b));
  return best;
}

}  // namespace

double hausdorff_distance(const Polygon& a, const Polygon& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

std::string polygon_literal(const Polygon& poly) {
  std::string s = "[";
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (i) s += ", ";
    s += "[" + fmt17(poly[i].x) + ", " + fmt17(poly[i].y) + "]";
  }
  return s + "]";
}

}  // namespace polyeit
