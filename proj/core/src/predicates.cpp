#include "predicates.hpp"

#include <cmath>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace fracinterp::detail {

namespace {

// Enough bits to hold the incircle determinant of double inputs of similar
// magnitude without rounding.
using Exact = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<320, boost::multiprecision::digit_base_2>,
    boost::multiprecision::et_off>;

constexpr double kEps = 1.1102230246251565e-16;  // 2^-53
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

template <class T>
int sign(const T& v) {
  return (v > 0) - (v < 0);
}

int orient_exact(Point2 a, Point2 b, Point2 c) {
  const Exact acx = Exact(a.x) - c.x, bcx = Exact(b.x) - c.x;
  const Exact acy = Exact(a.y) - c.y, bcy = Exact(b.y) - c.y;
  return sign(acx * bcy - acy * bcx);
}

int incircle_exact(Point2 a, Point2 b, Point2 c, Point2 d) {
  const Exact adx = Exact(a.x) - d.x, ady = Exact(a.y) - d.y;
  const Exact bdx = Exact(b.x) - d.x, bdy = Exact(b.y) - d.y;
  const Exact cdx = Exact(c.x) - d.x, cdy = Exact(c.y) - d.y;
  const Exact alift = adx * adx + ady * ady;
  const Exact blift = bdx * bdx + bdy * bdy;
  const Exact clift = cdx * cdx + cdy * cdy;
  return sign(alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
              clift * (adx * bdy - bdx * ady));
}

}  // namespace

int orient2d(Point2 a, Point2 b, Point2 c) {
  const double left = (a.x - c.x) * (b.y - c.y);
  const double right = (a.y - c.y) * (b.x - c.x);
  const double det = left - right;
  const double bound = kOrientBound * (std::abs(left) + std::abs(right));
  if (det > bound || -det > bound) return sign(det);
  return orient_exact(a, b, c);
}

int incircle(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bc = bdx * cdy, cb = cdx * bdy;
  const double ca = cdx * ady, ac = adx * cdy;
  const double ab = adx * bdy, ba = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bc - cb) + blift * (ca - ac) + clift * (ab - ba);
  const double permanent = (std::abs(bc) + std::abs(cb)) * alift +
                           (std::abs(ca) + std::abs(ac)) * blift +
                           (std::abs(ab) + std::abs(ba)) * clift;
  const double bound = kInCircleBound * permanent;
  if (det > bound || -det > bound) return sign(det);
  return incircle_exact(a, b, c, d);
}

}  // namespace fracinterp::detail
