#include "fracinterp/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fracinterp/errors.hpp"

namespace fracinterp {

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

namespace {

// Orientation with a dead zone: points within kBoundaryTolerance of the
// line through a and b count as collinear, so nearly collinear segments
// fall through to the bounding-box overlap test instead of a spurious
// sign change.
int orientation_sign(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  if (std::abs(v) <= kBoundaryTolerance * norm(b - a)) return 0;
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  const int o1 = orientation_sign(a, b, c);
  const int o2 = orientation_sign(a, b, d);
  const int o3 = orientation_sign(c, d, a);
  const int o4 = orientation_sign(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double segment_segment_distance(Point2 a, Point2 b, Point2 c, Point2 d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

void Box2::expand(Point2 p) {
  lo.x = std::min(lo.x, p.x);
  lo.y = std::min(lo.y, p.y);
  hi.x = std::max(hi.x, p.x);
  hi.y = std::max(hi.y, p.y);
}

std::array<double, 3> Triangle2::barycentric(Point2 p) const {
  const double det = cross(v[1] - v[0], v[2] - v[0]);
  const double l1 = cross(p - v[0], v[2] - v[0]) / det;
  const double l2 = cross(v[1] - v[0], p - v[0]) / det;
  return {1.0 - l1 - l2, l1, l2};
}

std::array<Point2, 3> Triangle2::barycentric_gradients() const {
  const double det = cross(v[1] - v[0], v[2] - v[0]);
  // grad l_i = perp(v_{i+2} - v_{i+1}) / det, oriented so that l_i grows toward v_i.
  std::array<Point2, 3> g;
  for (int i = 0; i < 3; ++i) {
    const Point2 e = v[(i + 2) % 3] - v[(i + 1) % 3];
    g[i] = Point2{-e.y, e.x} / det;
  }
  return g;
}

double Triangle2::inradius() const {
  const double a = distance(v[1], v[2]);
  const double b = distance(v[0], v[2]);
  const double c = distance(v[0], v[1]);
  return 2.0 * area() / (a + b + c);
}

Point2 Triangle2::incenter() const {
  const double a = distance(v[1], v[2]);
  const double b = distance(v[0], v[2]);
  const double c = distance(v[0], v[1]);
  return (a * v[0] + b * v[1] + c * v[2]) / (a + b + c);
}

double Triangle2::circumradius() const {
  const double a = distance(v[1], v[2]);
  const double b = distance(v[0], v[2]);
  const double c = distance(v[0], v[1]);
  return a * b * c / (4.0 * area());
}

double Triangle2::diameter() const {
  return std::max({distance(v[1], v[2]), distance(v[0], v[2]), distance(v[0], v[1])});
}

double polygon_signed_area(std::span<const Point2> ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) acc += cross(ring[i], ring[(i + 1) % n]);
  return 0.5 * acc;
}

bool point_in_ring(std::span<const Point2> ring, Point2 p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = ring[i];
    const Point2 b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (xi > p.x) inside = !inside;
    }
  }
  return inside;
}

// ---------------------------------------------------------------------------
// SegmentGrid

SegmentGrid::SegmentGrid(std::span<const BoundarySegment> segments, double cell_hint)
    : segments_(segments) {
  for (const auto& s : segments) {
    bounds_.expand(s.a);
    bounds_.expand(s.b);
  }
  if (segments.empty()) return;
  const double w = std::max(bounds_.width(), 1e-12);
  const double h = std::max(bounds_.height(), 1e-12);
  double mean_len = 0.0;
  for (const auto& s : segments) mean_len += distance(s.a, s.b);
  mean_len /= static_cast<double>(segments.size());
  cell_ = cell_hint > 0.0 ? cell_hint : std::max(mean_len, std::sqrt(w * h / segments.size()));
  constexpr int kMaxCells = 1024;
  cell_ = std::max({cell_, w / kMaxCells, h / kMaxCells});
  nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));

  std::vector<int> counts(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
  auto for_cells = [&](const BoundarySegment& s, auto&& fn) {
    const int x0 = cell_x(std::min(s.a.x, s.b.x));
    const int x1 = cell_x(std::max(s.a.x, s.b.x));
    const int y0 = cell_y(std::min(s.a.y, s.b.y));
    const int y1 = cell_y(std::max(s.a.y, s.b.y));
    for (int cy = y0; cy <= y1; ++cy)
      for (int cx = x0; cx <= x1; ++cx) fn(cy * nx_ + cx);
  };
  for (const auto& s : segments) for_cells(s, [&](int c) { ++counts[c + 1]; });
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  offsets_ = counts;
  items_.assign(offsets_.back(), 0);
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (int i = 0; i < static_cast<int>(segments.size()); ++i)
    for_cells(segments[i], [&](int c) { items_[fill[c]++] = i; });
}

int SegmentGrid::cell_x(double x) const {
  return std::clamp(static_cast<int>(std::floor((x - bounds_.lo.x) / cell_)), 0, nx_ - 1);
}

int SegmentGrid::cell_y(double y) const {
  return std::clamp(static_cast<int>(std::floor((y - bounds_.lo.y) / cell_)), 0, ny_ - 1);
}

std::pair<int, double> SegmentGrid::nearest(Point2 p) const {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  if (segments_.empty()) return {best, best_d};
  const int cx = cell_x(p.x);
  const int cy = cell_y(p.y);
  // Distance from p to the clamped cell; a lower bound offset for all rings.
  const double outside = std::max({bounds_.lo.x - p.x, p.x - bounds_.hi.x, bounds_.lo.y - p.y,
                                   p.y - bounds_.hi.y, 0.0});
  const int max_ring = std::max(nx_, ny_);
  for (int ring = 0; ring <= max_ring; ++ring) {
    for (int y = cy - ring; y <= cy + ring; ++y) {
      if (y < 0 || y >= ny_) continue;
      const bool edge_row = (y == cy - ring || y == cy + ring);
      for (int x = cx - ring; x <= cx + ring; x += (edge_row ? 1 : 2 * ring)) {
        if (x >= 0 && x < nx_) {
          const int c = y * nx_ + x;
          for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) {
            const auto& s = segments_[items_[k]];
            const double d = point_segment_distance(p, s.a, s.b);
            if (d < best_d) {
              best_d = d;
              best = items_[k];
            }
          }
        }
        if (ring == 0) break;
      }
    }
    if (best >= 0 && best_d <= outside + ring * cell_) break;
  }
  return {best, best_d};
}

void SegmentGrid::query_box(const Box2& box, std::vector<int>& out) const {
  out.clear();
  if (segments_.empty() || box.hi.x < bounds_.lo.x || box.lo.x > bounds_.hi.x ||
      box.hi.y < bounds_.lo.y || box.lo.y > bounds_.hi.y)
    return;
  const int x0 = cell_x(box.lo.x), x1 = cell_x(box.hi.x);
  const int y0 = cell_y(box.lo.y), y1 = cell_y(box.hi.y);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const int c = y * nx_ + x;
      out.insert(out.end(), items_.begin() + offsets_[c], items_.begin() + offsets_[c + 1]);
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

void SegmentGrid::query_row_right(Point2 p, std::vector<int>& out) const {
  out.clear();
  if (segments_.empty() || p.y < bounds_.lo.y || p.y > bounds_.hi.y || p.x > bounds_.hi.x) return;
  const int cy = cell_y(p.y);
  for (int x = cell_x(p.x); x < nx_; ++x) {
    const int c = cy * nx_ + x;
    out.insert(out.end(), items_.begin() + offsets_[c], items_.begin() + offsets_[c + 1]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

void SegmentGrid::query_ray(Point2 o, Point2 u, std::vector<int>& out) const {
  out.clear();
  if (segments_.empty()) return;
  // Clip the ray to the grid bounds first.
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  const double lo[2] = {bounds_.lo.x, bounds_.lo.y};
  const double hi[2] = {bounds_.hi.x, bounds_.hi.y};
  const double org[2] = {o.x, o.y};
  const double dir[2] = {u.x, u.y};
  for (int a = 0; a < 2; ++a) {
    if (dir[a] == 0.0) {
      if (org[a] < lo[a] || org[a] > hi[a]) return;
      continue;
    }
    double ta = (lo[a] - org[a]) / dir[a], tb = (hi[a] - org[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return;
  const Point2 start = o + t0 * u;
  int cx = cell_x(start.x), cy = cell_y(start.y);
  const int step_x = u.x > 0 ? 1 : -1, step_y = u.y > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  auto boundary_t = [&](double origin, double d, int cell, int step, double lo_edge) {
    if (d == 0.0) return inf;
    const double edge = lo_edge + (cell + (step > 0 ? 1 : 0)) * cell_;
    return (edge - origin) / d;
  };
  double tx = boundary_t(o.x, u.x, cx, step_x, bounds_.lo.x);
  double ty = boundary_t(o.y, u.y, cy, step_y, bounds_.lo.y);
  const double dtx = u.x == 0.0 ? inf : cell_ / std::abs(u.x);
  const double dty = u.y == 0.0 ? inf : cell_ / std::abs(u.y);
  while (cx >= 0 && cx < nx_ && cy >= 0 && cy < ny_) {
    const int c = cy * nx_ + cx;
    out.insert(out.end(), items_.begin() + offsets_[c], items_.begin() + offsets_[c + 1]);
    if (std::min(tx, ty) > t1) break;
    if (tx < ty) {
      cx += step_x;
      tx += dtx;
    } else {
      cy += step_y;
      ty += dty;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

// ---------------------------------------------------------------------------
// Domain validation

namespace {

std::string point_str(Point2 p) {
  std::ostringstream os;
  os << '(' << p.x << ", " << p.y << ')';
  return os.str();
}

std::string chain_name(ChainKind kind, int chain) {
  switch (kind) {
    case ChainKind::outer:
      return "outer";
    case ChainKind::hole:
      return "holes[" + std::to_string(chain) + "]";
    case ChainKind::slit:
      return "slits[" + std::to_string(chain) + "]";
  }
  return "?";
}

void check_chain_points(const Chain& c, ChainKind kind, int idx, std::size_t min_points) {
  if (c.size() < min_points)
    throw ValidationError(chain_name(kind, idx) + ": needs at least " +
                          std::to_string(min_points) + " vertices");
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!std::isfinite(c[i].x) || !std::isfinite(c[i].y))
      throw ValidationError(chain_name(kind, idx) + "[" + std::to_string(i) +
                            "]: non-finite coordinate");
}

std::vector<BoundarySegment> collect_segments(const DomainSpec& s) {
  std::vector<BoundarySegment> out;
  auto add_closed = [&](const Chain& c, ChainKind kind, int chain) {
    for (std::size_t i = 0; i < c.size(); ++i)
      out.push_back({c[i], c[(i + 1) % c.size()], kind, chain, static_cast<int>(i)});
  };
  add_closed(s.outer, ChainKind::outer, 0);
  for (std::size_t h = 0; h < s.holes.size(); ++h)
    add_closed(s.holes[h], ChainKind::hole, static_cast<int>(h));
  for (std::size_t k = 0; k < s.slits.size(); ++k) {
    const auto& c = s.slits[k];
    for (std::size_t i = 0; i + 1 < c.size(); ++i)
      out.push_back({c[i], c[i + 1], ChainKind::slit, static_cast<int>(k), static_cast<int>(i)});
  }
  return out;
}

// Chain-internal neighbors share a vertex by construction.
bool chain_adjacent(const BoundarySegment& s, const BoundarySegment& t, const DomainSpec& spec) {
  if (s.kind != t.kind || s.chain != t.chain) return false;
  const int d = std::abs(s.index - t.index);
  if (d == 1) return true;
  if (s.kind == ChainKind::slit) return false;
  const int n = static_cast<int>(s.kind == ChainKind::outer ? spec.outer.size()
                                                            : spec.holes[s.chain].size());
  return d == n - 1;
}

// A slit may end on another chain: the contact is exactly the slit's free end.
bool slit_end_contact(const BoundarySegment& slit, const BoundarySegment& other,
                      const DomainSpec& spec) {
  if (slit.kind != ChainKind::slit) return false;
  const Chain& c = spec.slits[slit.chain];
  const int last = static_cast<int>(c.size()) - 2;
  Point2 end;
  Point2 inner;
  if (slit.index == 0 && point_segment_distance(c.front(), other.a, other.b) <= kBoundaryTolerance) {
    end = c.front();
    inner = slit.b;
  } else if (slit.index == last &&
             point_segment_distance(c.back(), other.a, other.b) <= kBoundaryTolerance) {
    end = c.back();
    inner = slit.a;
  } else {
    return false;
  }
  (void)end;
  return point_segment_distance(inner, other.a, other.b) > kBoundaryTolerance &&
         std::abs(cross(other.b - other.a, inner - other.a)) > 0.0;
}

void validate(const DomainSpec& spec, std::span<const BoundarySegment> segments,
              const SegmentGrid& grid) {
  for (const auto& s : segments)
    if (distance(s.a, s.b) <= kBoundaryTolerance)
      throw ValidationError(chain_name(s.kind, s.chain) + "[" + std::to_string(s.index) +
                            "]: zero-length segment at " + point_str(s.a));

  // Fold-back of consecutive segments.
  for (std::size_t i = 0; i < segments.size(); ++i)
    for (std::size_t j = i + 1; j < segments.size() && j <= i + 1; ++j) {
      const auto& s = segments[i];
      const auto& t = segments[j];
      if (!chain_adjacent(s, t, spec)) continue;
      const Point2 d1 = s.b - s.a;
      const Point2 d2 = t.b - t.a;
      if (std::abs(cross(d1, d2)) <= 1e-14 * norm(d1) * norm(d2) && dot(d1, d2) < 0.0)
        throw ValidationError(chain_name(s.kind, s.chain) + ": chain folds back on itself at " +
                              point_str(s.b));
    }

  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
    const auto& s = segments[i];
    Box2 box;
    box.expand(s.a);
    box.expand(s.b);
    box.lo -= Point2{kBoundaryTolerance, kBoundaryTolerance};
    box.hi += Point2{kBoundaryTolerance, kBoundaryTolerance};
    grid.query_box(box, candidates);
    for (int j : candidates) {
      if (j <= i) continue;
      const auto& t = segments[j];
      if (chain_adjacent(s, t, spec)) continue;
      if (segment_segment_distance(s.a, s.b, t.a, t.b) > kBoundaryTolerance) continue;
      if (slit_end_contact(s, t, spec) || slit_end_contact(t, s, spec)) continue;
      if (s.kind == t.kind && s.chain == t.chain)
        throw ValidationError(chain_name(s.kind, s.chain) + ": chain is not simple (segments " +
                              std::to_string(s.index) + " and " + std::to_string(t.index) +
                              " intersect)");
      throw ValidationError(chain_name(s.kind, s.chain) + " crosses " +
                            chain_name(t.kind, t.chain) + " near " + point_str(s.a));
    }
  }

  for (std::size_t h = 0; h < spec.holes.size(); ++h) {
    for (const auto& p : spec.holes[h])
      if (!point_in_ring(spec.outer, p))
        throw ValidationError("holes[" + std::to_string(h) + "]: vertex " + point_str(p) +
                              " is not strictly inside outer");
    for (std::size_t g = 0; g < spec.holes.size(); ++g)
      if (g != h && point_in_ring(spec.holes[g], spec.holes[h].front()))
        throw ValidationError("holes[" + std::to_string(h) + "] is nested inside holes[" +
                              std::to_string(g) + "]");
  }

  for (std::size_t k = 0; k < spec.slits.size(); ++k) {
    const auto& c = spec.slits[k];
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      const Point2 mid = 0.5 * (c[i] + c[i + 1]);
      bool inside = point_in_ring(spec.outer, mid);
      for (const auto& hole : spec.holes)
        if (point_in_ring(hole, mid)) inside = false;
      if (!inside)
        throw ValidationError("slits[" + std::to_string(k) + "][" + std::to_string(i) +
                              "]: segment is not inside the domain");
    }
  }
}

DomainSpec normalized(DomainSpec spec) {
  check_chain_points(spec.outer, ChainKind::outer, 0, 3);
  for (std::size_t h = 0; h < spec.holes.size(); ++h)
    check_chain_points(spec.holes[h], ChainKind::hole, static_cast<int>(h), 3);
  for (std::size_t k = 0; k < spec.slits.size(); ++k)
    check_chain_points(spec.slits[k], ChainKind::slit, static_cast<int>(k), 2);
  if (polygon_signed_area(spec.outer) < 0.0) std::reverse(spec.outer.begin(), spec.outer.end());
  for (auto& hole : spec.holes)
    if (polygon_signed_area(hole) > 0.0) std::reverse(hole.begin(), hole.end());
  return spec;
}

}  // namespace

Domain::Domain(DomainSpec spec) : spec_(normalized(std::move(spec))) {
  build_index();
  validate(spec_, segments_, grid_);
}

Domain::Domain(const Domain& other) : spec_(other.spec_) { build_index(); }

Domain& Domain::operator=(const Domain& other) {
  if (this != &other) {
    spec_ = other.spec_;
    build_index();
  }
  return *this;
}

void Domain::build_index() {
  segments_ = collect_segments(spec_);
  grid_ = SegmentGrid(segments_);
  bounds_ = Box2{};
  for (const auto& p : spec_.outer) bounds_.expand(p);
  area_ = polygon_signed_area(spec_.outer);
  for (const auto& hole : spec_.holes) area_ += polygon_signed_area(hole);
}

double Domain::distance_to_boundary(Point2 p) const { return grid_.nearest(p).second; }

bool Domain::contains(Point2 p) const {
  if (p.x <= bounds_.lo.x || p.x >= bounds_.hi.x || p.y <= bounds_.lo.y || p.y >= bounds_.hi.y)
    return false;
  if (distance_to_boundary(p) <= kBoundaryTolerance) return false;
  thread_local std::vector<int> candidates;
  grid_.query_row_right(p, candidates);
  bool inside = false;
  for (int i : candidates) {
    const auto& s = segments_[i];
    if (s.kind == ChainKind::slit) continue;
    if ((s.a.y > p.y) != (s.b.y > p.y)) {
      const double xi = s.a.x + (p.y - s.a.y) * (s.b.x - s.a.x) / (s.b.y - s.a.y);
      if (xi > p.x) inside = !inside;
    }
  }
  return inside;
}

void Domain::ray_hits(Point2 x, Point2 u, std::vector<RayHit>& out) const {
  out.clear();
  thread_local std::vector<int> candidates;
  if (segments_.size() <= 32) {
    candidates.resize(segments_.size());
    std::iota(candidates.begin(), candidates.end(), 0);
  } else {
    grid_.query_ray(x, u, candidates);
  }
  for (int i : candidates) {
    const auto& s = segments_[i];
    const bool side_a = cross(u, s.a - x) > 0.0;
    const bool side_b = cross(u, s.b - x) > 0.0;
    if (side_a == side_b) continue;
    const Point2 d = s.b - s.a;
    const double t = cross(s.a - x, d) / cross(u, d);
    if (t <= 0.0) continue;
    out.push_back({t, s.kind != ChainKind::slit});
  }
  std::sort(out.begin(), out.end(), [](const RayHit& a, const RayHit& b) { return a.t < b.t; });
}

double Domain::boundary_distance(Point2 p) const {
  if (!contains(p)) throw DomainError("boundary_distance: point " + point_str(p) +
                                      " is not in the open interior");
  return distance_to_boundary(p);
}

bool Domain::in_restricted_pair(Point2 x, Point2 y) const {
  return distance(x, y) < 0.5 * boundary_distance(x);
}

bool Domain::segment_in_domain(Point2 x, Point2 y) const {
  if (!contains(x) || !contains(y)) return false;
  Box2 box;
  box.expand(x);
  box.expand(y);
  box.lo -= Point2{kBoundaryTolerance, kBoundaryTolerance};
  box.hi += Point2{kBoundaryTolerance, kBoundaryTolerance};
  thread_local std::vector<int> candidates;
  grid_.query_box(box, candidates);
  for (int i : candidates) {
    const auto& s = segments_[i];
    if (segment_segment_distance(x, y, s.a, s.b) <= kBoundaryTolerance) return false;
  }
  return true;
}

namespace {

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

double Domain::diameter() const {
  const auto hull = convex_hull(spec_.outer);
  double d = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) d = std::max(d, distance(hull[i], hull[j]));
  return d;
}

double Domain::shortest_segment() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : segments_) m = std::min(m, distance(s.a, s.b));
  return m;
}

double Domain::feature_separation() const {
  double best = std::numeric_limits<double>::infinity();
  double radius = 2.0 * shortest_segment();
  std::vector<int> candidates;
  while (true) {
    for (int i = 0; i < static_cast<int>(segments_.size()); ++i) {
      const auto& s = segments_[i];
      Box2 box;
      box.expand(s.a);
      box.expand(s.b);
      box.lo -= Point2{radius, radius};
      box.hi += Point2{radius, radius};
      grid_.query_box(box, candidates);
      for (int j : candidates) {
        if (j <= i) continue;
        const auto& t = segments_[j];
        const double d = segment_segment_distance(s.a, s.b, t.a, t.b);
        // Touching pairs are chain neighbors or validated slit contacts.
        if (d > kBoundaryTolerance) best = std::min(best, d);
      }
    }
    if (best <= radius || radius > bounds_.diagonal()) break;
    radius *= 2.0;
  }
  return best;
}

std::vector<Point2> Domain::boundary_vertices() const {
  std::vector<Point2> out(spec_.outer);
  for (const auto& h : spec_.holes) out.insert(out.end(), h.begin(), h.end());
  for (const auto& s : spec_.slits) out.insert(out.end(), s.begin(), s.end());
  return out;
}

Domain Domain::translated(Point2 shift) const {
  DomainSpec s = spec_;
  auto move = [&](Chain& c) {
    for (auto& p : c) p += shift;
  };
  move(s.outer);
  for (auto& c : s.holes) move(c);
  for (auto& c : s.slits) move(c);
  return Domain(std::move(s));
}

Domain Domain::rotated(double angle, Point2 center) const {
  DomainSpec s = spec_;
  const double c = std::cos(angle), sn = std::sin(angle);
  auto rot = [&](Chain& ch) {
    for (auto& p : ch) {
      const Point2 d = p - center;
      p = center + Point2{c * d.x - sn * d.y, sn * d.x + c * d.y};
    }
  };
  rot(s.outer);
  for (auto& ch : s.holes) rot(ch);
  for (auto& ch : s.slits) rot(ch);
  return Domain(std::move(s));
}

DomainSpec unit_square() { return DomainSpec{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}, {}}; }

DomainSpec slit_domain() {
  return DomainSpec{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}, {}, {{{0, 0}, {1, 0}}}};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Chain chain_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError("field '" + field + "': expected an array of [x, y]");
  Chain c;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& pt = j[i];
    if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
      throw ValidationError("field '" + field + "[" + std::to_string(i) +
                            "]': expected a pair of numbers [x, y]");
    c.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  return c;
}

nlohmann::json chain_to_json(const Chain& c) {
  auto arr = nlohmann::json::array();
  for (const auto& p : c) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace

DomainSpec domain_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("domain: expected a JSON object");
  if (!j.contains("outer")) throw ValidationError("domain: missing field 'outer'");
  DomainSpec spec;
  spec.outer = chain_from_json(j.at("outer"), "outer");
  auto read_list = [&](const char* name, std::vector<Chain>& out) {
    if (!j.contains(name)) return;
    const auto& arr = j.at(name);
    if (!arr.is_array()) throw ValidationError(std::string("field '") + name + "': expected array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(chain_from_json(arr[i], std::string(name) + "[" + std::to_string(i) + "]"));
  };
  read_list("holes", spec.holes);
  read_list("slits", spec.slits);
  return spec;
}

nlohmann::json domain_to_json(const DomainSpec& spec) {
  nlohmann::json j;
  j["outer"] = chain_to_json(spec.outer);
  j["holes"] = nlohmann::json::array();
  for (const auto& h : spec.holes) j["holes"].push_back(chain_to_json(h));
  j["slits"] = nlohmann::json::array();
  for (const auto& s : spec.slits) j["slits"].push_back(chain_to_json(s));
  return j;
}

}  // namespace fracinterp
