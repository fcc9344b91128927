#include "fracinterp/snowflake.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "fracinterp/errors.hpp"

namespace fracinterp {

SnowflakeRule SnowflakePlan::rule(int g, std::size_t segment) const {
  const auto& r = rules.at(g - 1);
  return r.size() == 1 ? r.front() : r.at(segment);
}

SnowflakePlan SnowflakePlan::truncated(int n) const {
  SnowflakePlan out{p, {}};
  out.rules.assign(rules.begin(), rules.begin() + std::min<int>(n, generations()));
  return out;
}

SnowflakePlan uniform_plan(double p, SnowflakeRule rule, int generations) {
  SnowflakePlan plan{p, {}};
  plan.rules.assign(generations, {rule});
  return plan;
}

void validate_plan(const SnowflakePlan& plan) {
  if (!(plan.p > 0.25 && plan.p < 0.5))
    throw ValidationError("snowflake plan: p must lie in (1/4, 1/2), got " + std::to_string(plan.p));
  std::size_t count = 4;
  for (int g = 1; g <= plan.generations(); ++g) {
    const auto& r = plan.rules[g - 1];
    if (r.size() != 1 && r.size() != count)
      throw ValidationError("snowflake plan: generation " + std::to_string(g) + " lists " +
                            std::to_string(r.size()) + " rules, expected 1 or " +
                            std::to_string(count));
    count *= 4;
  }
}

namespace {

SnowflakeRule rule_from_string(const std::string& s, const std::string& where) {
  if (s == "straight") return SnowflakeRule::straight;
  if (s == "bump") return SnowflakeRule::bump;
  throw ValidationError(where + ": unknown rule '" + s + "' (expected \"straight\" or \"bump\")");
}

const char* rule_name(SnowflakeRule r) { return r == SnowflakeRule::bump ? "bump" : "straight"; }

}  // namespace

SnowflakePlan plan_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("p") || !j.at("p").is_number())
    throw ValidationError("snowflake plan: expected an object with numeric field 'p'");
  if (!j.contains("rules") || !j.at("rules").is_array())
    throw ValidationError("snowflake plan: field 'rules' must be an array");
  SnowflakePlan plan{j.at("p").get<double>(), {}};
  const auto& rules = j.at("rules");
  for (std::size_t g = 0; g < rules.size(); ++g) {
    const std::string where = "rules[" + std::to_string(g) + "]";
    if (rules[g].is_string()) {
      plan.rules.push_back({rule_from_string(rules[g].get<std::string>(), where)});
    } else if (rules[g].is_array()) {
      std::vector<SnowflakeRule> per_segment;
      for (const auto& r : rules[g]) {
        if (!r.is_string()) throw ValidationError(where + ": expected rule names");
        per_segment.push_back(rule_from_string(r.get<std::string>(), where));
      }
      plan.rules.push_back(std::move(per_segment));
    } else {
      throw ValidationError(where + ": expected a rule name or a list of rule names");
    }
  }
  validate_plan(plan);
  return plan;
}

nlohmann::json plan_to_json(const SnowflakePlan& plan) {
  nlohmann::json j;
  j["p"] = plan.p;
  j["rules"] = nlohmann::json::array();
  for (const auto& r : plan.rules) {
    if (r.size() == 1) {
      j["rules"].push_back(rule_name(r.front()));
    } else {
      auto arr = nlohmann::json::array();
      for (auto x : r) arr.push_back(rule_name(x));
      j["rules"].push_back(arr);
    }
  }
  return j;
}

int SnowflakeCurve::ancestor(int g, int i, int target) const {
  for (int k = g; k > target; --k) i = parent_segment[k][i];
  return i;
}

Snowflake build_snowflake(const SnowflakePlan& plan) {
  validate_plan(plan);
  Snowflake out;
  auto& curve = out.curve;
  auto& tree = out.tree;
  curve.polygons.push_back(unit_square().outer);
  curve.parent_segment.emplace_back();
  curve.owner.emplace_back(4, -1);

  const double p = plan.p;
  for (int g = 1; g <= plan.generations(); ++g) {
    const Chain& prev = curve.polygons.back();
    const auto& prev_owner = curve.owner.back();
    const std::size_t n = prev.size();
    Chain next;
    std::vector<int> parent;
    std::vector<int> owner;
    next.reserve(4 * n);
    parent.reserve(4 * n);
    owner.reserve(4 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 a = prev[i];
      const Point2 b = prev[(i + 1) % n];
      const double len = distance(a, b);
      const Point2 u = (b - a) / len;
      const int o = prev_owner[i];
      if (plan.rule(g, i) == SnowflakeRule::straight) {
        for (int k = 0; k < 4; ++k) {
          next.push_back(a + (0.25 * k) * (b - a));
          parent.push_back(static_cast<int>(i));
          owner.push_back(o);
        }
        continue;
      }
      const Point2 outward{u.y, -u.x};
      const double side = p * len;
      const double half_base = 0.5 * (len - 2.0 * side);
      const double height = std::sqrt(side * side - half_base * half_base);
      const Point2 q1 = a + side * u;
      const Point2 q2 = b - side * u;
      const Point2 apex = 0.5 * (a + b) + height * outward;
      const int tent = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({Triangle2{{q1, apex, q2}}, g, o, static_cast<int>(i)});
      tree.children.emplace_back();
      if (o < 0) {
        tree.roots.push_back(tent);
      } else {
        tree.children[o].push_back(tent);
      }
      for (Point2 v : {a, q1, apex, q2}) {
        next.push_back(v);
        parent.push_back(static_cast<int>(i));
      }
      owner.insert(owner.end(), {o, tent, tent, o});
    }
    try {
      Domain check(DomainSpec{next, {}, {}});
    } catch (const ValidationError& e) {
      throw ValidationError("snowflake generation " + std::to_string(g) +
                            ": self-intersection detected (" + e.what() + ")");
    }
    curve.polygons.push_back(std::move(next));
    curve.parent_segment.push_back(std::move(parent));
    curve.owner.push_back(std::move(owner));
  }
  return out;
}

SnowflakeStats snowflake_stats(const SnowflakePlan& plan) {
  validate_plan(plan);
  bool all_uniform = true;
  for (int g = 1; g <= plan.generations(); ++g) all_uniform = all_uniform && plan.uniform(g);
  SnowflakeStats st;
  if (all_uniform) {
    double ratio = 1.0;
    for (int g = 1; g <= plan.generations(); ++g)
      ratio *= plan.rule(g, 0) == SnowflakeRule::bump ? plan.p : 0.25;
    st.segment_count = static_cast<std::size_t>(4) << (2 * plan.generations());
    st.min_segment_length = ratio;
    st.perimeter = static_cast<double>(st.segment_count) * ratio;
    return st;
  }
  std::vector<double> lengths(4, 1.0);
  for (int g = 1; g <= plan.generations(); ++g) {
    std::vector<double> next;
    next.reserve(4 * lengths.size());
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      const double r = plan.rule(g, i) == SnowflakeRule::bump ? plan.p : 0.25;
      next.insert(next.end(), 4, r * lengths[i]);
    }
    lengths.swap(next);
  }
  st.segment_count = lengths.size();
  st.min_segment_length = *std::min_element(lengths.begin(), lengths.end());
  st.perimeter = 0.0;
  for (double l : lengths) st.perimeter += l;
  return st;
}

SnowflakeStats measure_polygon(const Chain& polygon) {
  SnowflakeStats st;
  st.segment_count = polygon.size();
  st.min_segment_length = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const double l = distance(polygon[i], polygon[(i + 1) % polygon.size()]);
    st.perimeter += l;
    st.min_segment_length = std::min(st.min_segment_length, l);
  }
  return st;
}

}  // namespace fracinterp
