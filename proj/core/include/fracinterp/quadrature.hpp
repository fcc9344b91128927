#pragma once

#include <array>
#include <span>
#include <vector>

#include "fracinterp/geometry.hpp"

namespace fracinterp {

/// Gauss-Legendre rule mapped to [0, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached Gauss-Legendre rule with n points, 1 <= n <= 32.
const GaussRule& gauss_legendre(int n);

struct TrianglePoint {
  std::array<double, 3> bary;
  double weight;  // weights sum to 1; multiply by the triangle area
};

/// Six-point symmetric rule, exact for polynomials of degree 4.
std::span<const TrianglePoint> triangle_rule_degree4();

/// Splits a triangle into 4^levels congruent children.
std::vector<Triangle2> subdivide(const Triangle2& t, int levels);

/// Pairwise (tree) summation; the result is independent of how the input
/// was produced as long as the ordering is fixed.
double pairwise_sum(std::span<const double> values);

}  // namespace fracinterp
