#pragma once

#include "polyeit/vec2.hpp"

namespace polyeit::detail {

/// Sign-exact orientation test: > 0 when (a, b, c) turns counter-clockwise,
/// 0 when collinear. The magnitude is only meaningful when non-degenerate.
double orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

/// Sign-exact in-circle test: > 0 when d lies strictly inside the circle
/// through the counter-clockwise triangle (a, b, c).
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

}  // namespace polyeit::detail
