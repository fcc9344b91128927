#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fracinterp/geometry.hpp"

namespace fracinterp {

enum class SnowflakeRule { straight, bump };

/// Generation-wise replacement rules. Each generation holds either a single
/// rule applied to every segment or one rule per segment of the previous
/// generation's polygon.
struct SnowflakePlan {
  double p = 0.3;
  std::vector<std::vector<SnowflakeRule>> rules;

  [[nodiscard]] int generations() const { return static_cast<int>(rules.size()); }
  /// Rule applied to segment `segment` of generation `g - 1` when building g.
  [[nodiscard]] SnowflakeRule rule(int g, std::size_t segment) const;
  [[nodiscard]] bool uniform(int g) const { return rules[g - 1].size() == 1; }
  /// The same plan truncated to its first n generations.
  [[nodiscard]] SnowflakePlan truncated(int n) const;
};

SnowflakePlan uniform_plan(double p, SnowflakeRule rule, int generations);
/// Throws ValidationError when p is outside (1/4, 1/2) or per-segment rule
/// lists have the wrong length.
void validate_plan(const SnowflakePlan& plan);
SnowflakePlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const SnowflakePlan& plan);

/// One tent triangle (q1, apex, q2) added by a bump.
struct TentNode {
  Triangle2 triangle;
  int generation = 0;
  int parent = -1;   ///< owning tent of the replaced segment, -1 for roots
  int segment = -1;  ///< index of the replaced segment in generation - 1
};

struct TriangleTree {
  std::vector<TentNode> nodes;
  std::vector<std::vector<int>> children;
  std::vector<int> roots;
};

struct SnowflakeCurve {
  /// polygons[g] is the counterclockwise generation-g polygon, g = 0..N.
  std::vector<Chain> polygons;
  /// parent_segment[g][i]: index in generation g-1 of the segment that
  /// segment i of generation g was cut from (empty for g = 0).
  std::vector<std::vector<int>> parent_segment;
  /// owner[g][i]: tent whose side contains segment i, or -1.
  std::vector<std::vector<int>> owner;

  [[nodiscard]] int generation() const { return static_cast<int>(polygons.size()) - 1; }
  [[nodiscard]] const Chain& polygon() const { return polygons.back(); }
  /// Index of the generation-`target` segment that contains segment `i` of
  /// generation `g` (target <= g).
  [[nodiscard]] int ancestor(int g, int i, int target) const;
};

struct SnowflakeStats {
  std::size_t segment_count = 0;
  double perimeter = 0.0;
  double min_segment_length = 0.0;
};

struct Snowflake {
  SnowflakeCurve curve;
  TriangleTree tree;
};

/// Applies the plan to the unit square. Throws ValidationError if any
/// generation fails the simplicity check.
Snowflake build_snowflake(const SnowflakePlan& plan);
/// Closed-form statistics of the generation-N polygon.
SnowflakeStats snowflake_stats(const SnowflakePlan& plan);
/// Statistics measured on a constructed polygon.
SnowflakeStats measure_polygon(const Chain& polygon);

}  // namespace fracinterp
