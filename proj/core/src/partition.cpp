#include "fracinterp/partition.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fracinterp/errors.hpp"

namespace fracinterp {

PartitionOfUnity PartitionOfUnity::lagrange(Mesh mesh) {
  PartitionOfUnity pu;
  pu.mesh_ = std::move(mesh);
  pu.scale_ = pu.mesh_.target_scale;
  for (std::size_t t = 0; t < pu.mesh_.triangles.size(); ++t)
    pu.cells_.push_back(
        {pu.mesh_.triangle(t), static_cast<int>(t), -1, static_cast<int>(t)});
  pu.finalize();
  return pu;
}

void PartitionOfUnity::finalize() {
  const std::size_t n = mesh_.vertices.size();
  patches_.assign(n, {});
  john_centers_.assign(n, Point2{});
  john_radii_.assign(n, 0.0);
  for (std::size_t c = 0; c < cells_.size(); ++c)
    for (int v : mesh_.triangles[cells_[c].host]) patches_[v].push_back(static_cast<int>(c));
  for (std::size_t j = 0; j < n; ++j) {
    for (int c : patches_[j]) {
      if (cells_[c].mesh_triangle < 0) continue;
      const double r = cells_[c].triangle.inradius();
      if (r > john_radii_[j]) {
        john_radii_[j] = r;
        john_centers_[j] = cells_[c].triangle.incenter();
      }
    }
  }
  std::vector<Triangle2> tris;
  tris.reserve(cells_.size());
  for (const auto& c : cells_) tris.push_back(c.triangle);
  locator_ = TriangleLocator(std::move(tris));
}

int PartitionOfUnity::eval(std::size_t c, Point2 x, std::array<PuEntry, 3>& out) const {
  const PuCell& cell = cells_[c];
  const auto& verts = mesh_.triangles[cell.host];
  const Triangle2 host = mesh_.triangle(cell.host);
  const auto lambda = host.barycentric(x);
  const auto grads = host.barycentric_gradients();
  if (cell.tent < 0) {
    for (int k = 0; k < 3; ++k) out[k] = {verts[k], lambda[k], grads[k]};
    return 3;
  }
  double sum = 0.0;
  Point2 sum_grad{};
  std::array<double, 3> phi{};
  std::array<Point2, 3> dphi{};
  for (int k = 0; k < 3; ++k) {
    if (lambda[k] > 0.0) {
      phi[k] = lambda[k];
      dphi[k] = grads[k];
    }
    sum += phi[k];
    sum_grad += dphi[k];
  }
  for (int k = 0; k < 3; ++k)
    out[k] = {verts[k], phi[k] / sum, (sum * dphi[k] - phi[k] * sum_grad) / (sum * sum)};
  return 3;
}

double PartitionOfUnity::value(std::size_t j, Point2 x) const {
  const int c = locate(x);
  if (c < 0) return 0.0;
  std::array<PuEntry, 3> e;
  const int n = eval(c, x, e);
  for (int k = 0; k < n; ++k)
    if (e[k].index == static_cast<int>(j)) return e[k].value;
  return 0.0;
}

double PartitionOfUnity::patch_diameter(std::size_t j) const {
  std::vector<Point2> pts;
  for (int c : patches_[j])
    for (const auto& v : cells_[c].triangle.v) pts.push_back(v);
  double d = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) d = std::max(d, distance(pts[a], pts[b]));
  return d;
}

double PartitionOfUnity::max_gradient() const {
  double g = 0.0;
  std::array<PuEntry, 3> e;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Triangle2& t = cells_[c].triangle;
    const Point2 samples[4] = {t.centroid(), t.at(0.9, 0.05, 0.05), t.at(0.05, 0.9, 0.05),
                               t.at(0.05, 0.05, 0.9)};
    for (const auto& x : samples) {
      const int n = eval(c, x, e);
      for (int k = 0; k < n; ++k) g = std::max(g, norm(e[k].gradient));
    }
  }
  return g;
}

int PartitionOfUnity::max_overlap() const {
  int m = 0;
  for (const auto& c : cells_) {
    const auto& t = mesh_.triangles[c.host];
    m = std::max(m, 1 + (t[1] != t[0]) + (t[2] != t[0] && t[2] != t[1]));
  }
  return m;
}

int snowflake_level(double p, double ell) {
  if (!(ell > 0.0)) throw ValidationError("snowflake partition: scale must be positive");
  return std::max(0, static_cast<int>(std::ceil(std::log(ell) / std::log(p) - 1e-9)));
}

struct SnowflakePartitionBuilder {
  static SnowflakePartition build(const Snowflake& flake, double p, double ell) {
    const int n_max = flake.curve.generation();
    const int level = snowflake_level(p, ell);
    if (level > n_max)
      throw ValidationError("snowflake partition: plan has " + std::to_string(n_max) +
                            " generations but scale " + std::to_string(ell) + " needs " +
                            std::to_string(level));
    const Chain& dn = flake.curve.polygons[level];
    const Domain domain(DomainSpec{dn, {}, {}});
    const double h = std::min(std::pow(p, level), domain.shortest_segment());
    SnowflakePartition out{level, PartitionOfUnity::lagrange(triangulate(domain, h))};
    PartitionOfUnity& pu = out.pu;
    pu.scale_ = ell;

    // Host triangle of every generation-N segment: the mesh triangle just
    // inside its midpoint.
    const TriangleLocator locator(pu.mesh_);
    std::vector<int> host(dn.size(), -1);
    for (std::size_t i = 0; i < dn.size(); ++i) {
      const Point2 a = dn[i], b = dn[(i + 1) % dn.size()];
      const Point2 inward = perp(b - a) / distance(a, b);
      host[i] = locator.locate(0.5 * (a + b) + (1e-6 * distance(a, b)) * inward);
      if (host[i] < 0) throw NumericError("snowflake partition: no host triangle for a segment");
    }
    for (std::size_t t = 0; t < flake.tree.nodes.size(); ++t) {
      const TentNode& node = flake.tree.nodes[t];
      if (node.generation <= level) continue;
      const int seg = flake.curve.ancestor(node.generation - 1, node.segment, level);
      pu.cells_.push_back({node.triangle, -1, static_cast<int>(t), host[seg]});
      pu.extended_ = true;
    }
    pu.finalize();
    return out;
  }
};

SnowflakePartition snowflake_partition(const Snowflake& flake, double p, double ell) {
  return SnowflakePartitionBuilder::build(flake, p, ell);
}

SnowflakePartition snowflake_partition(const SnowflakePlan& plan, double ell) {
  return snowflake_partition(build_snowflake(plan), plan.p, ell);
}

nlohmann::json partition_to_json(const PartitionOfUnity& pu) {
  nlohmann::json j;
  j["scale"] = pu.scale();
  j["extended"] = pu.extended();
  auto verts = nlohmann::json::array();
  for (const auto& v : pu.mesh().vertices) verts.push_back({v.x, v.y});
  j["vertices"] = verts;
  auto patches = nlohmann::json::array();
  for (std::size_t k = 0; k < pu.size(); ++k) {
    nlohmann::json p;
    p["vertex"] = k;
    p["john_center"] = {pu.john_center(k).x, pu.john_center(k).y};
    p["john_radius"] = pu.john_radius(k);
    p["cells"] = pu.patch_cells(k);
    // Nodal coefficients of psi_k on the mesh: the Lagrange property.
    p["coefficients"] = nlohmann::json::object({{std::to_string(k), 1.0}});
    patches.push_back(p);
  }
  j["patches"] = patches;
  return j;
}

}  // namespace fracinterp
