#include "fracinterp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

#include "delaunay.hpp"
#include "fracinterp/errors.hpp"

namespace fracinterp {

namespace {

void check_scale(const Domain& domain, double ell) {
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw ValidationError("triangulate: scale must be positive and finite");
  const double shortest = domain.shortest_segment();
  const double separation = domain.feature_separation();
  auto refuse = [&](const char* feature, double size) {
    std::ostringstream os;
    os << "scale exceeds feature size: ell = " << ell << " but " << feature << " = " << size;
    throw ValidationError(os.str());
  };
  if (ell > 1.5 * shortest) refuse("shortest boundary segment", shortest);
  if (ell > 1.5 * separation) refuse("feature separation", separation);
}

// --- structured scheme -----------------------------------------------------

bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-9 * std::max(1.0, std::abs(v)); }

/// Largest spacing <= ell that puts every boundary vertex on a grid anchored
/// at the bounding-box minimum; 0 if the domain is not grid aligned.
double structured_spacing(const Domain& domain, double ell) {
  for (const auto& s : domain.segments())
    if (std::abs(s.a.x - s.b.x) > 0.0 && std::abs(s.a.y - s.b.y) > 0.0) return 0.0;
  const Box2& box = domain.bounds();
  const auto verts = domain.boundary_vertices();
  const int n0 = std::max(1, static_cast<int>(std::ceil(box.width() / ell - 1e-9)));
  for (int n = n0; n < n0 + 64; ++n) {
    const double h = box.width() / n;
    if (!near_integer(box.height() / h)) continue;
    bool ok = true;
    for (const auto& v : verts) {
      if (!near_integer((v.x - box.lo.x) / h) || !near_integer((v.y - box.lo.y) / h)) {
        ok = false;
        break;
      }
    }
    if (ok) return h;
  }
  return 0.0;
}

Mesh structured_mesh(const Domain& domain, double h) {
  const Box2& box = domain.bounds();
  const int nx = static_cast<int>(std::lround(box.width() / h));
  const int ny = static_cast<int>(std::lround(box.height() / h));
  std::vector<int> index((nx + 1) * (ny + 1), -1);
  Mesh mesh;
  auto vertex = [&](int i, int j) {
    int& id = index[j * (nx + 1) + i];
    if (id < 0) {
      id = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back({box.lo.x + i * h, box.lo.y + j * h});
    }
    return id;
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point2 center{box.lo.x + (i + 0.5) * h, box.lo.y + (j + 0.5) * h};
      if (!domain.contains(center)) continue;
      const int v00 = vertex(i, j), v10 = vertex(i + 1, j);
      const int v11 = vertex(i + 1, j + 1), v01 = vertex(i, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  return mesh;
}

// --- Delaunay scheme ---------------------------------------------------------

struct BoundarySamples {
  std::vector<Point2> points;
  std::vector<std::pair<int, int>> edges;
};

/// Splits every boundary segment into pieces of length <= h, first cutting
/// at slit endpoints that touch the segment.
BoundarySamples sample_boundary(const Domain& domain, double h) {
  BoundarySamples out;
  std::vector<Point2> slit_ends;
  for (const auto& c : domain.spec().slits) {
    slit_ends.push_back(c.front());
    slit_ends.push_back(c.back());
  }
  const double tol = 1e-9 * h;
  auto find_or_add = [&](Point2 p) {
    for (std::size_t i = 0; i < out.points.size(); ++i)
      if (distance(out.points[i], p) <= tol) return static_cast<int>(i);
    out.points.push_back(p);
    return static_cast<int>(out.points.size()) - 1;
  };
  // Vertices are shared only between consecutive segments of a chain and at
  // slit contacts, so a linear search over chain vertices suffices there.
  std::vector<int> chain_vertex_ids;
  for (const auto& s : domain.segments()) {
    std::vector<double> cuts{0.0, 1.0};
    const Point2 d = s.b - s.a;
    const double len2 = dot(d, d);
    for (const auto& e : slit_ends) {
      if (s.kind == ChainKind::slit) break;
      if (point_segment_distance(e, s.a, s.b) > tol) continue;
      const double t = dot(e - s.a, d) / len2;
      if (t > 1e-9 && t < 1.0 - 1e-9) cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const Point2 a = s.a + cuts[c] * d;
      const Point2 b = s.a + cuts[c + 1] * d;
      const double len = distance(a, b);
      const int n = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
      int prev = -1;
      for (int k = 0; k <= n; ++k) {
        const Point2 p = a + (static_cast<double>(k) / n) * (b - a);
        int id;
        if (k == 0 || k == n) {
          id = find_or_add(p);
        } else {
          id = static_cast<int>(out.points.size());
          out.points.push_back(p);
        }
        if (prev >= 0) out.edges.emplace_back(prev, id);
        prev = id;
      }
    }
  }
  return out;
}

Mesh delaunay_mesh(const Domain& domain, double h) {
  // The corner-vertex search in sample_boundary is linear in the number of
  // chain vertices; snowflake polygons have a few thousand, which is fine.
  BoundarySamples bs = sample_boundary(domain, h);
  Box2 box = domain.bounds();
  detail::Delaunay dt(box);

  std::vector<int> id_map(bs.points.size());
  for (std::size_t i = 0; i < bs.points.size(); ++i) id_map[i] = dt.insert(bs.points[i]);

  const double dy = h * std::sqrt(3.0) / 2.0;
  const int rows = static_cast<int>(std::ceil(box.height() / dy)) + 1;
  const int cols = static_cast<int>(std::ceil(box.width() / h)) + 2;
  for (int k = 0; k < rows; ++k) {
    const double y = box.lo.y + k * dy;
    const double shift = (k % 2) ? 0.5 * h : 0.0;
    for (int i = 0; i < cols; ++i) {
      const Point2 p{box.lo.x + shift + i * h, y};
      if (!domain.contains(p)) continue;
      if (domain.distance_to_boundary(p) < 0.5 * h) continue;
      dt.insert(p);
    }
  }

  std::vector<std::pair<int, int>> constraints;
  for (auto [a, b] : bs.edges) constraints.emplace_back(id_map[a], id_map[b]);
  constexpr int kMaxRounds = 40;
  for (int round = 0;; ++round) {
    const auto edges = dt.edges();
    std::vector<std::pair<int, int>> next;
    bool missing = false;
    for (auto [a, b] : constraints) {
      if (std::binary_search(edges.begin(), edges.end(), detail::Delaunay::edge_key(a, b))) {
        next.emplace_back(a, b);
        continue;
      }
      missing = true;
      const int m = dt.insert(0.5 * (dt.points()[a] + dt.points()[b]));
      next.emplace_back(a, m);
      next.emplace_back(m, b);
    }
    constraints.swap(next);
    if (!missing) break;
    if (round == kMaxRounds) throw NumericError("triangulate: boundary recovery did not converge");
  }

  Mesh mesh;
  std::vector<int> remap(dt.points().size(), -1);
  for (const auto& t : dt.triangles()) {
    if (!t.alive || t.v[0] < 3 || t.v[1] < 3 || t.v[2] < 3) continue;
    const Triangle2 tri{{dt.points()[t.v[0]], dt.points()[t.v[1]], dt.points()[t.v[2]]}};
    if (!domain.contains(tri.centroid())) continue;
    std::array<int, 3> out{};
    for (int k = 0; k < 3; ++k) {
      int& r = remap[t.v[k]];
      if (r < 0) {
        r = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(dt.points()[t.v[k]]);
      }
      out[k] = r;
    }
    mesh.triangles.push_back(out);
  }
  return mesh;
}

// --- post-processing ---------------------------------------------------------

int boundary_segment_of_edge(const Domain& domain, Point2 a, Point2 b, double tol) {
  const Point2 mid = 0.5 * (a + b);
  const auto [seg, d] = domain.grid().nearest(mid);
  if (seg < 0 || d > tol) return -1;
  const auto& s = domain.segments()[seg];
  if (point_segment_distance(a, s.a, s.b) > tol || point_segment_distance(b, s.a, s.b) > tol)
    return -1;
  return seg;
}

void orient_and_flag(Mesh& mesh, const Domain& domain, double h) {
  for (auto& t : mesh.triangles)
    if (mesh.triangle(&t - mesh.triangles.data()).signed_area() < 0.0) std::swap(t[1], t[2]);
  const double tol = 1e-9 * h;
  mesh.boundary_edges.assign(mesh.triangles.size(), {false, false, false});
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) {
      const Point2 a = mesh.vertices[mesh.triangles[t][k]];
      const Point2 b = mesh.vertices[mesh.triangles[t][(k + 1) % 3]];
      mesh.boundary_edges[t][k] = boundary_segment_of_edge(domain, a, b, tol) >= 0;
    }
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// Gives every vertex on a slit one copy per connected component of its
/// triangle fan, where fan triangles connect across non-slit edges.
void duplicate_slit_vertices(Mesh& mesh, const Domain& domain, double h) {
  mesh.side_tags.assign(mesh.vertices.size(), SideTag::none);
  if (domain.spec().slits.empty()) return;
  const double tol = 1e-9 * h;

  std::unordered_set<std::uint64_t> slit_edges;
  std::vector<int> slit_segment_of_vertex(mesh.vertices.size(), -1);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) {
      if (!mesh.boundary_edges[t][k]) continue;
      const int a = mesh.triangles[t][k], b = mesh.triangles[t][(k + 1) % 3];
      const int seg = boundary_segment_of_edge(domain, mesh.vertices[a], mesh.vertices[b], tol);
      if (seg < 0 || domain.segments()[seg].kind != ChainKind::slit) continue;
      slit_edges.insert(detail::Delaunay::edge_key(a, b));
      slit_segment_of_vertex[a] = slit_segment_of_vertex[b] = seg;
    }
  if (slit_edges.empty()) return;

  std::vector<std::vector<int>> fans(mesh.vertices.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int v : mesh.triangles[t])
      if (slit_segment_of_vertex[v] >= 0) fans[v].push_back(static_cast<int>(t));

  const std::size_t original_count = mesh.vertices.size();
  for (std::size_t v = 0; v < original_count; ++v) {
    const auto& fan = fans[v];
    if (fan.empty()) continue;
    UnionFind uf(fan.size());
    for (std::size_t i = 0; i < fan.size(); ++i)
      for (std::size_t j = i + 1; j < fan.size(); ++j) {
        // Shared edge (v, w) that is not a slit edge joins the two triangles.
        for (int w : mesh.triangles[fan[i]]) {
          if (w == static_cast<int>(v)) continue;
          const auto& tj = mesh.triangles[fan[j]];
          if (std::find(tj.begin(), tj.end(), w) == tj.end()) continue;
          if (!slit_edges.count(detail::Delaunay::edge_key(static_cast<int>(v), w)))
            uf.unite(static_cast<int>(i), static_cast<int>(j));
        }
      }
    std::vector<int> roots;
    for (std::size_t i = 0; i < fan.size(); ++i) {
      const int r = uf.find(static_cast<int>(i));
      if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    }
    if (roots.size() < 2) continue;

    const auto& seg = domain.segments()[slit_segment_of_vertex[v]];
    const Point2 dir = seg.b - seg.a;
    for (std::size_t c = 0; c < roots.size(); ++c) {
      Point2 centroid{};
      int count = 0;
      for (std::size_t i = 0; i < fan.size(); ++i)
        if (uf.find(static_cast<int>(i)) == roots[c]) {
          centroid += mesh.triangle(fan[i]).centroid();
          ++count;
        }
      centroid = centroid / count;
      const SideTag tag =
          cross(dir, centroid - mesh.vertices[v]) > 0.0 ? SideTag::upper : SideTag::lower;
      int target = static_cast<int>(v);
      if (c > 0) {
        target = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(mesh.vertices[v]);
        mesh.side_tags.push_back(tag);
        mesh.duplicates.emplace_back(static_cast<int>(v), target);
        for (std::size_t i = 0; i < fan.size(); ++i)
          if (uf.find(static_cast<int>(i)) == roots[c])
            for (int& w : mesh.triangles[fan[i]])
              if (w == static_cast<int>(v)) w = target;
      }
      mesh.side_tags[target] = tag;
    }
  }
}

void check_connected(const Mesh& mesh) {
  if (mesh.triangles.empty()) throw NumericError("triangulate: empty mesh");
  std::vector<std::pair<std::uint64_t, int>> edges;
  edges.reserve(3 * mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k)
      edges.emplace_back(
          detail::Delaunay::edge_key(mesh.triangles[t][k], mesh.triangles[t][(k + 1) % 3]),
          static_cast<int>(t));
  std::sort(edges.begin(), edges.end());
  UnionFind uf(mesh.triangles.size());
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (edges[i].first == edges[i + 1].first) uf.unite(edges[i].second, edges[i + 1].second);
  const int root = uf.find(0);
  for (std::size_t t = 1; t < mesh.triangles.size(); ++t)
    if (uf.find(static_cast<int>(t)) != root)
      throw NumericError("triangulate: mesh is not connected");
}

}  // namespace

Mesh triangulate(const Domain& domain, double ell, MeshScheme scheme) {
  check_scale(domain, ell);
  Mesh mesh;
  double h = ell;
  const double hs =
      scheme == MeshScheme::delaunay ? 0.0 : structured_spacing(domain, ell);
  if (scheme == MeshScheme::structured && hs == 0.0)
    throw ValidationError("triangulate: structured scheme needs an axis-aligned, grid-aligned domain");
  if (hs > 0.0) {
    h = hs;
    mesh = structured_mesh(domain, hs);
  } else {
    mesh = delaunay_mesh(domain, ell);
  }
  mesh.target_scale = h;
  orient_and_flag(mesh, domain, h);
  duplicate_slit_vertices(mesh, domain, h);
  check_connected(mesh);
  return mesh;
}

MeshQuality mesh_quality(const Mesh& mesh) {
  MeshQuality q;
  q.min_inradius_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Triangle2 tri = mesh.triangle(t);
    q.min_inradius_ratio = std::min(q.min_inradius_ratio, tri.inradius() / mesh.target_scale);
    q.max_circumradius_ratio =
        std::max(q.max_circumradius_ratio, tri.circumradius() / mesh.target_scale);
  }
  // A point inside a triangle lies in the patch of each of its vertices;
  // duplicated vertices make all three distinct.
  for (const auto& t : mesh.triangles) {
    const int distinct = 1 + (t[1] != t[0]) + (t[2] != t[0] && t[2] != t[1]);
    q.max_overlap = std::max(q.max_overlap, distinct);
  }
  return q;
}

// --- locator ------------------------------------------------------------------

TriangleLocator::TriangleLocator(const Mesh& mesh) : TriangleLocator([&] {
  std::vector<Triangle2> tris;
  tris.reserve(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) tris.push_back(mesh.triangle(t));
  return tris;
}()) {}

TriangleLocator::TriangleLocator(std::vector<Triangle2> triangles)
    : triangles_(std::move(triangles)) {
  if (triangles_.empty()) return;
  double mean = 0.0;
  for (const auto& t : triangles_) {
    for (const auto& v : t.v) bounds_.expand(v);
    mean += t.diameter();
  }
  mean /= static_cast<double>(triangles_.size());
  cell_ = std::max({mean, bounds_.width() / 2048.0, bounds_.height() / 2048.0, 1e-300});
  nx_ = std::max(1, static_cast<int>(std::ceil(bounds_.width() / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(bounds_.height() / cell_)));
  auto cx = [&](double x) {
    return std::clamp(static_cast<int>((x - bounds_.lo.x) / cell_), 0, nx_ - 1);
  };
  auto cy = [&](double y) {
    return std::clamp(static_cast<int>((y - bounds_.lo.y) / cell_), 0, ny_ - 1);
  };
  std::vector<int> counts(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
  auto for_cells = [&](const Triangle2& t, auto&& fn) {
    Box2 b;
    for (const auto& v : t.v) b.expand(v);
    for (int y = cy(b.lo.y); y <= cy(b.hi.y); ++y)
      for (int x = cx(b.lo.x); x <= cx(b.hi.x); ++x) fn(y * nx_ + x);
  };
  for (const auto& t : triangles_) for_cells(t, [&](int c) { ++counts[c + 1]; });
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  offsets_ = counts;
  items_.assign(offsets_.back(), 0);
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (int i = 0; i < static_cast<int>(triangles_.size()); ++i)
    for_cells(triangles_[i], [&](int c) { items_[fill[c]++] = i; });
}

int TriangleLocator::locate(Point2 p) const {
  if (triangles_.empty() || p.x < bounds_.lo.x || p.x > bounds_.hi.x || p.y < bounds_.lo.y ||
      p.y > bounds_.hi.y)
    return -1;
  const int x = std::clamp(static_cast<int>((p.x - bounds_.lo.x) / cell_), 0, nx_ - 1);
  const int y = std::clamp(static_cast<int>((p.y - bounds_.lo.y) / cell_), 0, ny_ - 1);
  const int c = y * nx_ + x;
  int best = -1;
  double best_min = -1e-10;
  for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) {
    const auto bary = triangles_[items_[k]].barycentric(p);
    const double m = std::min({bary[0], bary[1], bary[2]});
    if (m > best_min) {
      best_min = m;
      best = items_[k];
    }
  }
  return best;
}

// --- io -------------------------------------------------------------------------

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << std::setprecision(17);
  os << "scale " << mesh.target_scale << '\n';
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    os << "v " << mesh.vertices[i].x << ' ' << mesh.vertices[i].y;
    const SideTag tag = i < mesh.side_tags.size() ? mesh.side_tags[i] : SideTag::none;
    if (tag == SideTag::upper) os << " U";
    if (tag == SideTag::lower) os << " L";
    os << '\n';
  }
  for (const auto& t : mesh.triangles) os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& [a, b] : mesh.duplicates) os << "dup " << a << ' ' << b << '\n';
}

Mesh read_mesh(std::istream& is) {
  Mesh mesh;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ValidationError("mesh line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind[0] == '#') continue;
    if (kind == "scale") {
      if (!(ls >> mesh.target_scale)) fail("expected 'scale <value>'");
    } else if (kind == "v") {
      Point2 p;
      if (!(ls >> p.x >> p.y)) fail("expected 'v x y [U|L]'");
      std::string tag;
      SideTag st = SideTag::none;
      if (ls >> tag) {
        if (tag == "U") st = SideTag::upper;
        else if (tag == "L") st = SideTag::lower;
        else fail("unknown side tag '" + tag + "'");
      }
      mesh.vertices.push_back(p);
      mesh.side_tags.push_back(st);
    } else if (kind == "t") {
      std::array<int, 3> t{};
      if (!(ls >> t[0] >> t[1] >> t[2])) fail("expected 't i j k'");
      mesh.triangles.push_back(t);
    } else if (kind == "dup") {
      int a = 0, b = 0;
      if (!(ls >> a >> b)) fail("expected 'dup i j'");
      mesh.duplicates.emplace_back(a, b);
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles)
    for (int v : t)
      if (v < 0 || v >= n) throw ValidationError("mesh: triangle references missing vertex " +
                                                 std::to_string(v));
  mesh.boundary_edges.assign(mesh.triangles.size(), {false, false, false});
  return mesh;
}

}  // namespace fracinterp
