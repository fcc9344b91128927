#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fracinterp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2& operator+=(Point2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point2& operator-=(Point2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Point2& operator*=(double c) {
    x *= c;
    y *= c;
    return *this;
  }
  friend constexpr bool operator==(Point2, Point2) = default;
};

constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
constexpr Point2 operator-(Point2 a) { return {-a.x, -a.y}; }
constexpr Point2 operator*(double c, Point2 a) { return {c * a.x, c * a.y}; }
constexpr Point2 operator*(Point2 a, double c) { return {c * a.x, c * a.y}; }
constexpr Point2 operator/(Point2 a, double c) { return {a.x / c, a.y / c}; }

constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
/// Counterclockwise rotation by 90 degrees.
constexpr Point2 perp(Point2 a) { return {-a.y, a.x}; }

double point_segment_distance(Point2 p, Point2 a, Point2 b);
/// Distance between closed segments [a,b] and [c,d]; zero when they touch.
double segment_segment_distance(Point2 a, Point2 b, Point2 c, Point2 d);
/// Closed-segment intersection test (touching counts).
bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d);

struct Box2 {
  Point2 lo{1e300, 1e300};
  Point2 hi{-1e300, -1e300};

  void expand(Point2 p);
  [[nodiscard]] bool empty() const { return lo.x > hi.x; }
  [[nodiscard]] double width() const { return hi.x - lo.x; }
  [[nodiscard]] double height() const { return hi.y - lo.y; }
  [[nodiscard]] double diagonal() const { return std::hypot(width(), height()); }
};

struct Triangle2 {
  std::array<Point2, 3> v;

  [[nodiscard]] double signed_area() const { return 0.5 * cross(v[1] - v[0], v[2] - v[0]); }
  [[nodiscard]] double area() const { return std::abs(signed_area()); }
  [[nodiscard]] Point2 centroid() const { return (v[0] + v[1] + v[2]) / 3.0; }
  [[nodiscard]] Point2 at(double l0, double l1, double l2) const {
    return l0 * v[0] + l1 * v[1] + l2 * v[2];
  }
  /// Barycentric coordinates of `p` (affine extension outside the triangle).
  [[nodiscard]] std::array<double, 3> barycentric(Point2 p) const;
  /// Gradients of the three barycentric coordinate functions.
  [[nodiscard]] std::array<Point2, 3> barycentric_gradients() const;
  [[nodiscard]] double inradius() const;
  [[nodiscard]] Point2 incenter() const;
  [[nodiscard]] double circumradius() const;
  [[nodiscard]] double diameter() const;
};

using Chain = std::vector<Point2>;

/// Planar polygonal domain: outer boundary minus holes minus slits
/// (zero-width fractures). Closed chains are stored without repeating the
/// first vertex.
struct DomainSpec {
  Chain outer;
  std::vector<Chain> holes;
  std::vector<Chain> slits;
};

enum class ChainKind { outer, hole, slit };

struct BoundarySegment {
  Point2 a;
  Point2 b;
  ChainKind kind = ChainKind::outer;
  int chain = 0;
  int index = 0;
};

/// Intersection of a ray with a boundary chain.
struct RayHit {
  double t = 0.0;
  bool toggles = true;  ///< closed chain crossing (false for slits)
};

/// Points within this distance of a boundary chain are classified as
/// boundary points.
inline constexpr double kBoundaryTolerance = 1e-12;

double polygon_signed_area(std::span<const Point2> ring);
bool point_in_ring(std::span<const Point2> ring, Point2 p);

/// Uniform bucket grid over a set of segments; answers nearest-segment and
/// ray-crossing queries in roughly constant time.
class SegmentGrid {
 public:
  SegmentGrid() = default;
  explicit SegmentGrid(std::span<const BoundarySegment> segments, double cell_hint = 0.0);

  /// Index of the nearest segment and its distance.
  [[nodiscard]] std::pair<int, double> nearest(Point2 p) const;
  /// Segment indices whose bounding boxes overlap the given box.
  void query_box(const Box2& box, std::vector<int>& out) const;
  /// Segments in the grid row of `p` at or right of `p` (deduplicated).
  void query_row_right(Point2 p, std::vector<int>& out) const;
  /// Segments in the grid cells traversed by the ray o + t u, t >= 0
  /// (deduplicated).
  void query_ray(Point2 o, Point2 u, std::vector<int>& out) const;
  [[nodiscard]] const Box2& bounds() const { return bounds_; }

 private:
  [[nodiscard]] int cell_x(double x) const;
  [[nodiscard]] int cell_y(double y) const;

  std::span<const BoundarySegment> segments_;
  Box2 bounds_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> offsets_;
  std::vector<int> items_;
};

/// A validated domain with a spatial index over its boundary.
///
/// Construction checks the structural invariants of DomainSpec (simple,
/// pairwise non-crossing chains, holes and slits inside the outer polygon)
/// and normalizes orientation: outer counterclockwise, holes clockwise.
/// Throws ValidationError on malformed input.
class Domain {
 public:
  explicit Domain(DomainSpec spec);
  Domain(const Domain& other);
  Domain& operator=(const Domain& other);
  Domain(Domain&&) noexcept = default;
  Domain& operator=(Domain&&) noexcept = default;

  [[nodiscard]] const DomainSpec& spec() const { return spec_; }
  [[nodiscard]] std::span<const BoundarySegment> segments() const { return segments_; }
  [[nodiscard]] const SegmentGrid& grid() const { return grid_; }

  /// True iff `p` is in the open interior. Points on any boundary chain,
  /// slits included, are not.
  [[nodiscard]] bool contains(Point2 p) const;
  /// Distance to the nearest boundary chain. Throws DomainError unless
  /// contains(p).
  [[nodiscard]] double boundary_distance(Point2 p) const;
  /// Distance to the nearest boundary chain for any point.
  [[nodiscard]] double distance_to_boundary(Point2 p) const;
  /// |x - y| < d(x)/2. Asymmetric in (x, y). Requires contains(x).
  [[nodiscard]] bool in_restricted_pair(Point2 x, Point2 y) const;
  /// True iff the closed segment [x, y] lies in the open interior.
  [[nodiscard]] bool segment_in_domain(Point2 x, Point2 y) const;

  /// Crossings of the ray x + t u (t > 0, |u| = 1) with boundary chains,
  /// sorted by t. A segment counts as crossed when its endpoints lie on
  /// opposite sides of the ray's supporting line, with points on the line
  /// assigned to the right side; this keeps inside/outside toggling
  /// consistent at vertices.
  void ray_hits(Point2 x, Point2 u, std::vector<RayHit>& out) const;

  [[nodiscard]] double area() const { return area_; }
  [[nodiscard]] const Box2& bounds() const { return bounds_; }
  [[nodiscard]] double diameter() const;
  /// Shortest boundary segment length.
  [[nodiscard]] double shortest_segment() const;
  /// Minimum distance between non-adjacent boundary segments.
  [[nodiscard]] double feature_separation() const;
  [[nodiscard]] std::vector<Point2> boundary_vertices() const;

  [[nodiscard]] Domain translated(Point2 shift) const;
  [[nodiscard]] Domain rotated(double angle, Point2 center = {}) const;

 private:
  void build_index();

  DomainSpec spec_;
  std::vector<BoundarySegment> segments_;
  SegmentGrid grid_;
  Box2 bounds_;
  double area_ = 0.0;
};

/// The unit square (0,1)^2.
DomainSpec unit_square();
/// (-1,1)^2 with the slit (0,1)x{0}.
DomainSpec slit_domain();

DomainSpec domain_from_json(const nlohmann::json& j);
nlohmann::json domain_to_json(const DomainSpec& spec);

}  // namespace fracinterp
