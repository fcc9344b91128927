#include "delaunay.hpp"

#include <algorithm>

#include "fracinterp/errors.hpp"
#include "predicates.hpp"

namespace fracinterp::detail {

Delaunay::Delaunay(const Box2& bounds) {
  const Point2 c = 0.5 * (bounds.lo + bounds.hi);
  const double r = 50.0 * std::max(bounds.diagonal(), 1e-6);
  points_ = {c + Point2{-r, -r}, c + Point2{r, -r}, c + Point2{0.0, r}};
  tris_.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, true});
}

int Delaunay::locate(Point2 p) const {
  int t = last_;
  if (!tris_[t].alive) {
    t = static_cast<int>(tris_.size()) - 1;
    while (!tris_[t].alive) --t;
  }
  const std::size_t max_steps = tris_.size() + 16;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const Tri& tri = tris_[t];
    int next = -1;
    for (int k = 0; k < 3; ++k) {
      const Point2 a = points_[tri.v[(k + 1) % 3]];
      const Point2 b = points_[tri.v[(k + 2) % 3]];
      if (orient2d(a, b, p) < 0) {
        next = tri.nb[k];
        break;
      }
    }
    if (next < 0) return t;
    t = next;
  }
  // The visibility walk cannot cycle on a Delaunay triangulation; keep a
  // brute-force fallback for safety.
  for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
    const Tri& tri = tris_[i];
    if (!tri.alive) continue;
    bool inside = true;
    for (int k = 0; k < 3 && inside; ++k)
      inside = orient2d(points_[tri.v[(k + 1) % 3]], points_[tri.v[(k + 2) % 3]], p) >= 0;
    if (inside) return i;
  }
  throw NumericError("delaunay: point location failed");
}

int Delaunay::insert(Point2 p) {
  const int start = locate(p);
  for (int v : tris_[start].v)
    if (points_[v] == p) return v;

  const int idx = static_cast<int>(points_.size());
  points_.push_back(p);

  std::vector<int> cavity{start};
  ++epoch_;
  if (stamp_.size() < tris_.size()) stamp_.resize(2 * tris_.size(), 0);
  auto mark = [&](int t) { stamp_[t] = epoch_; };
  auto marked = [&](int t) { return stamp_[t] == epoch_; };
  mark(start);
  for (std::size_t i = 0; i < cavity.size(); ++i) {
    const Tri& tri = tris_[cavity[i]];
    for (int k = 0; k < 3; ++k) {
      const int nb = tri.nb[k];
      if (nb < 0 || marked(nb)) continue;
      const Tri& n = tris_[nb];
      if (incircle(points_[n.v[0]], points_[n.v[1]], points_[n.v[2]], p) > 0) {
        mark(nb);
        cavity.push_back(nb);
      }
    }
  }

  struct Edge {
    int a, b, outer;
  };
  std::vector<Edge> boundary;
  for (int t : cavity) {
    const Tri& tri = tris_[t];
    for (int k = 0; k < 3; ++k) {
      const int nb = tri.nb[k];
      if (nb >= 0 && marked(nb)) continue;
      boundary.push_back({tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], nb});
    }
  }
  for (int t : cavity) tris_[t].alive = false;

  const int first = static_cast<int>(tris_.size());
  for (const auto& e : boundary) {
    const int id = static_cast<int>(tris_.size());
    tris_.push_back(Tri{{e.a, e.b, idx}, {-1, -1, e.outer}, true});
    if (e.outer >= 0) {
      Tri& o = tris_[e.outer];
      for (int k = 0; k < 3; ++k) {
        const int oa = o.v[(k + 1) % 3], ob = o.v[(k + 2) % 3];
        if (oa == e.b && ob == e.a) o.nb[k] = id;
      }
    }
  }
  const int last = static_cast<int>(tris_.size());
  for (int i = first; i < last; ++i) {
    Tri& t = tris_[i];
    for (int j = first; j < last; ++j) {
      if (j == i) continue;
      const Tri& u = tris_[j];
      if (u.v[0] == t.v[1]) t.nb[0] = j;  // shares edge (v1, p)
      if (u.v[1] == t.v[0]) t.nb[1] = j;  // shares edge (p, v0)
    }
  }
  last_ = first;
  return idx;
}

std::vector<std::uint64_t> Delaunay::edges() const {
  std::vector<std::uint64_t> out;
  for (const auto& t : tris_) {
    if (!t.alive) continue;
    for (int k = 0; k < 3; ++k) out.push_back(edge_key(t.v[k], t.v[(k + 1) % 3]));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace fracinterp::detail
