#pragma once

#include <cmath>
#include <ostream>

namespace polyeit {

/// Plain 2D vector used for points, displacements and gradients.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return Vec2(a.x / s, a.y / s); }
  friend constexpr Vec2 operator-(const Vec2& a) { return Vec2(-a.x, -a.y); }
  friend constexpr bool operator==(const Vec2& a, const Vec2& b) = default;

  friend std::ostream& operator<<(std::ostream& os, const Vec2& v) {
    return os << '(' << v.x << ", " << v.y << ')';
  }
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Vec2& a) { return dot(a, a); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }
/// Counter-clockwise rotation by 90 degrees.
constexpr Vec2 perp(const Vec2& a) { return Vec2(-a.y, a.x); }
inline Vec2 rotate(const Vec2& a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * a.x - s * a.y, s * a.x + c * a.y);
}

/// Distance from p to the closed segment [a, b]; `param` receives the clamped
/// segment parameter of the closest point.
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b,
                                     double* param = nullptr) {
  const Vec2 d = b - a;
  const double len2 = norm2(d);
  double s = len2 > 0.0 ? dot(p - a, d) / len2 : 0.0;
  s = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
  if (param) *param = s;
  return distance(p, a + s * d);
}

}  // namespace polyeit
