#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "fracinterp/geometry.hpp"

namespace fracinterp {

/// Side of a slit a duplicated vertex belongs to.
enum class SideTag : std::uint8_t { none, upper, lower };

struct Mesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;  ///< counterclockwise
  double target_scale = 0.0;
  std::vector<SideTag> side_tags;             ///< one per vertex
  std::vector<std::pair<int, int>> duplicates;  ///< (original, copy)
  /// boundary_edges[t][k] is set when edge (v_k, v_{k+1}) of triangle t
  /// lies on a boundary chain.
  std::vector<std::array<bool, 3>> boundary_edges;

  [[nodiscard]] Triangle2 triangle(std::size_t t) const {
    const auto& tri = triangles[t];
    return Triangle2{{vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]}};
  }
  [[nodiscard]] std::size_t num_vertices() const { return vertices.size(); }
  [[nodiscard]] std::size_t num_triangles() const { return triangles.size(); }
};

enum class MeshScheme { automatic, structured, delaunay };

/// Scale-`ell` triangulation of `domain`. The structured scheme applies when
/// every boundary segment is axis aligned and the vertices lie on a common
/// grid; otherwise a conforming Delaunay mesh of boundary samples and a
/// hexagonal interior lattice is built. Vertices on slits are duplicated,
/// one copy per side; slit tips stay single.
///
/// Throws ValidationError("scale exceeds feature size ...") when `ell` is
/// larger than 1.5 times the shortest boundary segment or the feature
/// separation.
Mesh triangulate(const Domain& domain, double ell, MeshScheme scheme = MeshScheme::automatic);

struct MeshQuality {
  double min_inradius_ratio = 0.0;      ///< min inradius / ell
  double max_circumradius_ratio = 0.0;  ///< max circumradius / ell
  int max_overlap = 0;                  ///< vertex patches covering a point
};

MeshQuality mesh_quality(const Mesh& mesh);

/// Uniform-grid point location over mesh triangles.
class TriangleLocator {
 public:
  TriangleLocator() = default;
  explicit TriangleLocator(std::vector<Triangle2> triangles);
  explicit TriangleLocator(const Mesh& mesh);

  /// Index of a triangle containing p (with a small tolerance), -1 if none.
  /// Among candidates, the one with the largest minimal barycentric wins.
  [[nodiscard]] int locate(Point2 p) const;
  [[nodiscard]] std::size_t size() const { return triangles_.size(); }

 private:
  std::vector<Triangle2> triangles_;
  Box2 bounds_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> offsets_;
  std::vector<int> items_;
};

void write_mesh(std::ostream& os, const Mesh& mesh);
/// Parses the line-based mesh format; throws ValidationError with the line
/// number on malformed input.
Mesh read_mesh(std::istream& is);

}  // namespace fracinterp
