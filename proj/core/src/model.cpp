#include "fracinterp/model.hpp"

#include <algorithm>
#include <cmath>

#include "fracinterp/errors.hpp"

namespace fracinterp {

std::vector<Triangle2> mesh_triangles(const Mesh& mesh) {
  std::vector<Triangle2> out;
  out.reserve(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) out.push_back(mesh.triangle(t));
  return out;
}

namespace {

double admissible_scale(const Domain& d) {
  return 1.5 * std::min(d.shortest_segment(), d.feature_separation());
}

class PolygonModel final : public DomainModel {
 public:
  PolygonModel(Domain d, std::string id)
      : domain_(std::move(d)), id_(std::move(id)), cap_(admissible_scale(domain_)) {}

  const std::string& id() const override { return id_; }
  const Domain& domain() const override { return domain_; }
  std::vector<Triangle2> cover(double h) const override {
    return mesh_triangles(triangulate(domain_, std::min(h, cap_)));
  }
  PartitionOfUnity partition(double ell) const override {
    return PartitionOfUnity::lagrange(triangulate(domain_, ell));
  }
  Mesh fe_mesh(double h) const override { return triangulate(domain_, std::min(h, cap_)); }
  double max_mesh_scale() const override { return cap_; }

 private:
  Domain domain_;
  std::string id_;
  double cap_;
};

class SnowflakeModel final : public DomainModel {
 public:
  SnowflakeModel(const SnowflakePlan& plan, std::string id)
      : plan_(plan), flake_(build_snowflake(plan)), id_(std::move(id)),
        domain_(DomainSpec{flake_.curve.polygon(), {}, {}}) {
    for (const auto& poly : flake_.curve.polygons) {
      generations_.emplace_back(DomainSpec{poly, {}, {}});
      caps_.push_back(admissible_scale(generations_.back()));
    }
  }

  const std::string& id() const override { return id_; }
  const Domain& domain() const override { return domain_; }

  /// Mesh of the generation whose segments are about h long, plus every
  /// deeper tent.
  std::vector<Triangle2> cover(double h) const override {
    const int n_max = flake_.curve.generation();
    int n = h >= 1.0 ? 0 : static_cast<int>(std::floor(std::log(h) / std::log(plan_.p) + 1e-9));
    n = std::clamp(n, 0, n_max);
    auto cells = mesh_triangles(triangulate(generations_[n], std::min(h, caps_[n])));
    for (const auto& node : flake_.tree.nodes)
      if (node.generation > n) cells.push_back(node.triangle);
    return cells;
  }
  PartitionOfUnity partition(double ell) const override {
    return snowflake_partition(flake_, plan_.p, ell).pu;
  }
  Mesh fe_mesh(double h) const override {
    return triangulate(domain_, std::min(h, caps_.back()));
  }
  double max_mesh_scale() const override { return caps_.back(); }
  double min_partition_scale() const override {
    return std::pow(plan_.p, flake_.curve.generation()) * (1.0 + 1e-9);
  }

 private:
  SnowflakePlan plan_;
  Snowflake flake_;
  std::string id_;
  Domain domain_;
  std::vector<Domain> generations_;
  std::vector<double> caps_;
};

}  // namespace

std::shared_ptr<const DomainModel> polygon_model(Domain domain, std::string id) {
  return std::make_shared<PolygonModel>(std::move(domain), std::move(id));
}

std::shared_ptr<const DomainModel> snowflake_model(const SnowflakePlan& plan, std::string id) {
  return std::make_shared<SnowflakeModel>(plan, std::move(id));
}

}  // namespace fracinterp
