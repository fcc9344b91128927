#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fracinterp/geometry.hpp"

namespace fracinterp::detail {

/// Incremental Bowyer-Watson triangulation inside a large enclosing
/// triangle. Vertices 0..2 are the enclosing triangle.
class Delaunay {
 public:
  struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nb;  ///< neighbor across the edge opposite v[k]
    bool alive = true;
  };

  explicit Delaunay(const Box2& bounds);

  /// Inserts p and returns its vertex index; returns the existing index if
  /// p coincides with a vertex.
  int insert(Point2 p);

  [[nodiscard]] const std::vector<Point2>& points() const { return points_; }
  [[nodiscard]] const std::vector<Tri>& triangles() const { return tris_; }
  /// Edge keys (min << 32 | max) of all live triangles.
  [[nodiscard]] std::vector<std::uint64_t> edges() const;

  static std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
  }

 private:
  int locate(Point2 p) const;

  std::vector<Point2> points_;
  std::vector<Tri> tris_;
  int last_ = 0;
  std::vector<int> stamp_;
  int epoch_ = 0;
};

}  // namespace fracinterp::detail
