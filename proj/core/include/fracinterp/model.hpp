#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fracinterp/mesh.hpp"
#include "fracinterp/partition.hpp"
#include "fracinterp/snowflake.hpp"

namespace fracinterp {

/// A domain together with the discretizations the numerical operations
/// need: quadrature covers, partitions of unity and finite-element meshes.
class DomainModel {
 public:
  virtual ~DomainModel() = default;

  [[nodiscard]] virtual const std::string& id() const = 0;
  [[nodiscard]] virtual const Domain& domain() const = 0;
  /// Triangles covering the domain with diameter about h.
  [[nodiscard]] virtual std::vector<Triangle2> cover(double h) const = 0;
  /// Partition of unity at scale ell.
  [[nodiscard]] virtual PartitionOfUnity partition(double ell) const = 0;
  /// Conforming mesh of the whole domain at scale <= h (clamped to what
  /// the geometry allows).
  [[nodiscard]] virtual Mesh fe_mesh(double h) const = 0;
  /// Largest admissible mesh scale for the full domain.
  [[nodiscard]] virtual double max_mesh_scale() const = 0;
  /// Smallest scale at which partition() works.
  [[nodiscard]] virtual double min_partition_scale() const { return 0.0; }
};

std::shared_ptr<const DomainModel> polygon_model(Domain domain, std::string id);
std::shared_ptr<const DomainModel> snowflake_model(const SnowflakePlan& plan, std::string id);

/// Triangles of a mesh as geometry.
std::vector<Triangle2> mesh_triangles(const Mesh& mesh);

}  // namespace fracinterp
