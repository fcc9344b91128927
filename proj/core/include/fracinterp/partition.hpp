#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fracinterp/mesh.hpp"
#include "fracinterp/snowflake.hpp"

namespace fracinterp {

/// One partition function evaluated at a point.
struct PuEntry {
  int index = -1;
  double value = 0.0;
  Point2 gradient{};
};

/// A triangle on which every partition function is a fixed formula: a mesh
/// triangle (linear hats) or a snowflake tent (renormalized clamped
/// extensions of the hats of its host triangle).
struct PuCell {
  Triangle2 triangle;
  int mesh_triangle = -1;  ///< -1 for tents
  int tent = -1;           ///< TriangleTree node, -1 for mesh triangles
  int host = -1;           ///< mesh triangle whose hats are extended
};

class PartitionOfUnity {
 public:
  /// Lagrange hats of `mesh`, one per (duplicated) vertex.
  static PartitionOfUnity lagrange(Mesh mesh);

  [[nodiscard]] const Mesh& mesh() const { return mesh_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] std::size_t size() const { return mesh_.vertices.size(); }
  [[nodiscard]] std::span<const PuCell> cells() const { return cells_; }
  [[nodiscard]] const std::vector<int>& patch_cells(std::size_t j) const { return patches_[j]; }
  [[nodiscard]] Point2 john_center(std::size_t j) const { return john_centers_[j]; }
  [[nodiscard]] double john_radius(std::size_t j) const { return john_radii_[j]; }
  [[nodiscard]] bool extended() const { return extended_; }

  /// Values and gradients of the (at most three) functions that can be
  /// nonzero on cell `c`, evaluated at x. Returns the entry count.
  int eval(std::size_t c, Point2 x, std::array<PuEntry, 3>& out) const;
  /// Cell containing x, or -1.
  [[nodiscard]] int locate(Point2 x) const { return locator_.locate(x); }
  /// psi_j(x); zero when x is outside every cell of patch j.
  [[nodiscard]] double value(std::size_t j, Point2 x) const;
  [[nodiscard]] double patch_diameter(std::size_t j) const;
  /// max over cells of |grad psi_j| sampled at cell vertices and centroid.
  [[nodiscard]] double max_gradient() const;
  /// Largest number of patches containing a common cell.
  [[nodiscard]] int max_overlap() const;

 private:
  friend struct SnowflakePartitionBuilder;
  void finalize();

  Mesh mesh_;
  double scale_ = 0.0;
  bool extended_ = false;
  std::vector<PuCell> cells_;
  std::vector<std::vector<int>> patches_;
  std::vector<Point2> john_centers_;
  std::vector<double> john_radii_;
  TriangleLocator locator_;
};

struct SnowflakePartition {
  int level = 0;  ///< N with p^N <= ell, the meshed generation
  PartitionOfUnity pu;
};

/// Partition of unity on the generation-N_max polygon of `flake`: the
/// Lagrange partition of a mesh of D_N, extended to all deeper tents.
/// Throws ValidationError when the plan is too shallow for `ell`.
SnowflakePartition snowflake_partition(const Snowflake& flake, double p, double ell);
SnowflakePartition snowflake_partition(const SnowflakePlan& plan, double ell);

/// Generation meshed for scale ell: ceil(log ell / log p).
int snowflake_level(double p, double ell);

nlohmann::json partition_to_json(const PartitionOfUnity& pu);

}  // namespace fracinterp
