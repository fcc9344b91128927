#pragma once

#include "fracinterp/geometry.hpp"

namespace fracinterp::detail {

/// Sign of the orientation determinant of (a, b, c): +1 counterclockwise,
/// -1 clockwise, 0 collinear. Exact.
int orient2d(Point2 a, Point2 b, Point2 c);

/// +1 when d lies strictly inside the circumcircle of the counterclockwise
/// triangle (a, b, c), -1 outside, 0 on the circle. Exact.
int incircle(Point2 a, Point2 b, Point2 c, Point2 d);

}  // namespace fracinterp::detail
