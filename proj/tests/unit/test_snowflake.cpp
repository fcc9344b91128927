#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "fracinterp/errors.hpp"
#include "fracinterp/geometry.hpp"
#include "fracinterp/snowflake.hpp"

using namespace fracinterp;

namespace {

SnowflakePlan mixed_plan(double p, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SnowflakePlan plan{p, {}};
  for (int g = 0; g < n; ++g)
    plan.rules.push_back({(rng() & 1u) ? SnowflakeRule::bump : SnowflakeRule::straight});
  return plan;
}

void check_stats_match(const SnowflakePlan& plan) {
  const Snowflake flake = build_snowflake(plan);
  const SnowflakeStats closed = snowflake_stats(plan);
  const SnowflakeStats measured = measure_polygon(flake.curve.polygon());
  CHECK(measured.segment_count == closed.segment_count);
  CHECK(measured.perimeter == doctest::Approx(closed.perimeter).epsilon(1e-12));
  CHECK(measured.min_segment_length == doctest::Approx(closed.min_segment_length).epsilon(1e-12));
}

}  // namespace

TEST_CASE("closed-form statistics") {
  const auto s0 = snowflake_stats(uniform_plan(0.3, SnowflakeRule::bump, 0));
  CHECK(s0.segment_count == 4);
  CHECK(s0.perimeter == doctest::Approx(4.0));
  CHECK(s0.min_segment_length == doctest::Approx(1.0));

  const auto straight = snowflake_stats(uniform_plan(0.26, SnowflakeRule::straight, 3));
  CHECK(straight.segment_count == 256);
  CHECK(straight.perimeter == doctest::Approx(4.0));
  CHECK(straight.min_segment_length == doctest::Approx(1.0 / 64));

  const auto bump = snowflake_stats(uniform_plan(0.26, SnowflakeRule::bump, 3));
  CHECK(bump.segment_count == 256);
  CHECK(bump.perimeter == doctest::Approx(4.0 * std::pow(1.04, 3)).epsilon(1e-12));
  CHECK(bump.min_segment_length == doctest::Approx(std::pow(0.26, 3)).epsilon(1e-12));
}

TEST_CASE("one straight generation keeps the unit square") {
  const Snowflake f = build_snowflake(uniform_plan(0.3, SnowflakeRule::straight, 1));
  const Chain& poly = f.curve.polygon();
  REQUIRE(poly.size() == 16);
  for (std::size_t i = 0; i < poly.size(); ++i)
    CHECK(distance(poly[i], poly[(i + 1) % poly.size()]) == doctest::Approx(0.25));
  CHECK(polygon_signed_area(poly) == doctest::Approx(1.0));
  CHECK(f.tree.nodes.empty());
}

TEST_CASE("bump generations: segment lengths and perimeters") {
  const Snowflake one = build_snowflake(uniform_plan(0.3, SnowflakeRule::bump, 1));
  REQUIRE(one.curve.polygon().size() == 16);
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(distance(one.curve.polygon()[i], one.curve.polygon()[(i + 1) % 16]) ==
          doctest::Approx(0.3));
  CHECK(measure_polygon(one.curve.polygon()).perimeter == doctest::Approx(4.8));
  CHECK(one.tree.roots.size() == 4);

  const Snowflake two = build_snowflake(uniform_plan(0.3, SnowflakeRule::bump, 2));
  CHECK(two.curve.polygon().size() == 64);
  CHECK(measure_polygon(two.curve.polygon()).perimeter == doctest::Approx(5.76));
  CHECK(measure_polygon(two.curve.polygon()).min_segment_length == doctest::Approx(0.09));
}

TEST_CASE("built polygons match the closed form for mixed rules") {
  for (double p : {0.26, 0.3, 0.35, 0.45})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) check_stats_match(mixed_plan(p, 5, seed));
  check_stats_match(uniform_plan(0.3, SnowflakeRule::bump, 6));
}

TEST_CASE("deep generations stay simple") {
  for (double p : {0.26, 0.3, 0.35, 0.45}) {
    CAPTURE(p);
    const Snowflake f = build_snowflake(uniform_plan(p, SnowflakeRule::bump, 6));
    CHECK(f.curve.polygon().size() == 4u * 4096u);
    // The domain constructor runs its own simplicity validation.
    CHECK_NOTHROW(Domain(DomainSpec{f.curve.polygon(), {}, {}}));
  }
}

TEST_CASE("enclosed area is nondecreasing in the generation") {
  const SnowflakePlan plan = mixed_plan(0.35, 6, 11);
  const Snowflake f = build_snowflake(plan);
  for (int g = 1; g <= f.curve.generation(); ++g) {
    const double prev = polygon_signed_area(f.curve.polygons[g - 1]);
    const double cur = polygon_signed_area(f.curve.polygons[g]);
    CHECK(cur >= prev - 1e-14);
    if (plan.rule(g, 0) == SnowflakeRule::straight) CHECK(cur == doctest::Approx(prev));
  }
}

TEST_CASE("tent triangles: shape, orientation and containment") {
  const double p = 0.35;
  const Snowflake f = build_snowflake(uniform_plan(p, SnowflakeRule::bump, 3));
  CHECK(f.tree.nodes.size() == 4 + 16 + 64);
  for (std::size_t k = 0; k < f.tree.nodes.size(); ++k) {
    const TentNode& node = f.tree.nodes[k];
    const double L = std::pow(p, node.generation - 1);
    const auto& v = node.triangle.v;
    CHECK(distance(v[0], v[1]) == doctest::Approx(p * L));
    CHECK(distance(v[1], v[2]) == doctest::Approx(p * L));
    CHECK(distance(v[0], v[2]) == doctest::Approx(L - 2 * p * L));
    // Tents point out of the previous polygon: the centroid is outside it.
    CHECK_FALSE(point_in_ring(f.curve.polygons[node.generation - 1], node.triangle.centroid()));
    if (node.parent >= 0) {
      const TentNode& parent = f.tree.nodes[node.parent];
      CHECK(parent.generation < node.generation);
      // The child's base lies on one of the parent's slanted sides.
      const auto& w = parent.triangle.v;
      const bool on_left = point_segment_distance(v[0], w[0], w[1]) < 1e-12 &&
                           point_segment_distance(v[2], w[0], w[1]) < 1e-12;
      const bool on_right = point_segment_distance(v[0], w[1], w[2]) < 1e-12 &&
                            point_segment_distance(v[2], w[1], w[2]) < 1e-12;
      CHECK((on_left || on_right));
      const auto& siblings = f.tree.children[node.parent];
      CHECK(std::find(siblings.begin(), siblings.end(), static_cast<int>(k)) != siblings.end());
    }
  }
  for (int r : f.tree.roots) CHECK(f.tree.nodes[r].parent == -1);
}

TEST_CASE("segment ancestry") {
  const Snowflake f = build_snowflake(uniform_plan(0.3, SnowflakeRule::bump, 3));
  const auto& c = f.curve;
  for (int i = 0; i < 256; ++i) {
    const int a = c.ancestor(3, i, 0);
    CHECK(a == i / 64);
    CHECK(c.ancestor(3, i, 3) == i);
  }
}

TEST_CASE("plan validation and JSON") {
  CHECK_THROWS_AS(validate_plan(uniform_plan(0.25, SnowflakeRule::bump, 1)), ValidationError);
  CHECK_THROWS_AS(validate_plan(uniform_plan(0.5, SnowflakeRule::bump, 1)), ValidationError);
  CHECK_THROWS_AS(build_snowflake(uniform_plan(0.2, SnowflakeRule::bump, 2)), ValidationError);

  const nlohmann::json j = {{"p", 0.3}, {"rules", {"bump", "straight"}}};
  const SnowflakePlan plan = plan_from_json(j);
  CHECK(plan.p == doctest::Approx(0.3));
  REQUIRE(plan.generations() == 2);
  CHECK(plan.rule(1, 0) == SnowflakeRule::bump);
  CHECK(plan.rule(2, 7) == SnowflakeRule::straight);
  CHECK(plan_to_json(plan) == j);
  CHECK_THROWS_AS(plan_from_json(nlohmann::json{{"p", 0.3}, {"rules", {"zigzag"}}}),
                  ValidationError);
}

TEST_CASE("per-segment rule lists") {
  SnowflakePlan plan{0.3, {{SnowflakeRule::bump, SnowflakeRule::straight, SnowflakeRule::straight,
                            SnowflakeRule::bump}}};
  validate_plan(plan);
  const Snowflake f = build_snowflake(plan);
  CHECK(f.tree.nodes.size() == 2);
  CHECK(measure_polygon(f.curve.polygon()).perimeter == doctest::Approx(2 * 1.2 + 2 * 1.0));
  plan.rules[0].pop_back();
  CHECK_THROWS_AS(validate_plan(plan), ValidationError);
}
