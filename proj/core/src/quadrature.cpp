#include "fracinterp/quadrature.hpp"

#include <algorithm>

#include <boost/math/special_functions/legendre.hpp>

#include "fracinterp/errors.hpp"

namespace fracinterp {

namespace {

constexpr int kMaxGauss = 32;

GaussRule make_gauss(int n) {
  GaussRule rule;
  const auto zeros = boost::math::legendre_p_zeros<double>(n);  // nonnegative zeros
  std::vector<std::pair<double, double>> nodes;
  for (double x : zeros) {
    const double dp = boost::math::legendre_p_prime<double>(n, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes.emplace_back(x, w);
    if (x != 0.0) nodes.emplace_back(-x, w);
  }
  std::sort(nodes.begin(), nodes.end());
  for (const auto& [x, w] : nodes) {
    rule.nodes.push_back(0.5 * (x + 1.0));
    rule.weights.push_back(0.5 * w);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static const std::vector<GaussRule> rules = [] {
    std::vector<GaussRule> r(kMaxGauss + 1);
    for (int k = 1; k <= kMaxGauss; ++k) r[k] = make_gauss(k);
    return r;
  }();
  if (n < 1 || n > kMaxGauss) throw ValidationError("gauss_legendre: order out of range");
  return rules[n];
}

std::span<const TrianglePoint> triangle_rule_degree4() {
  constexpr double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1, w1 = 0.223381589678011;
  constexpr double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2, w2 = 0.109951743655322;
  static const std::array<TrianglePoint, 6> rule{{
      {{b1, a1, a1}, w1},
      {{a1, b1, a1}, w1},
      {{a1, a1, b1}, w1},
      {{b2, a2, a2}, w2},
      {{a2, b2, a2}, w2},
      {{a2, a2, b2}, w2},
  }};
  return rule;
}

std::vector<Triangle2> subdivide(const Triangle2& t, int levels) {
  std::vector<Triangle2> cur{t};
  for (int l = 0; l < levels; ++l) {
    std::vector<Triangle2> next;
    next.reserve(cur.size() * 4);
    for (const auto& c : cur) {
      const Point2 m01 = 0.5 * (c.v[0] + c.v[1]);
      const Point2 m12 = 0.5 * (c.v[1] + c.v[2]);
      const Point2 m20 = 0.5 * (c.v[2] + c.v[0]);
      next.push_back({{c.v[0], m01, m20}});
      next.push_back({{m01, c.v[1], m12}});
      next.push_back({{m20, m12, c.v[2]}});
      next.push_back({{m12, m20, m01}});
    }
    cur.swap(next);
  }
  return cur;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 16;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace fracinterp
