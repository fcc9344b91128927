#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fracinterp/errors.hpp"
#include "fracinterp/mesh.hpp"
#include "fracinterp/partition.hpp"
#include "fracinterp/snowflake.hpp"

using namespace fracinterp;

namespace {

DomainSpec l_shape() {
  return {{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}, {}, {}};
}

// A pentagon with no axis-aligned edges forces the unstructured scheme.
DomainSpec pentagon() {
  Chain c;
  for (int k = 0; k < 5; ++k) {
    const double t = 0.3 + 2.0 * M_PI * k / 5.0;
    c.push_back({std::cos(t), std::sin(t)});
  }
  return {c, {}, {}};
}

std::vector<Point2> sample_points(const Domain& d, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Box2& b = d.bounds();
  std::uniform_real_distribution<double> ux(b.lo.x, b.hi.x), uy(b.lo.y, b.hi.y);
  std::vector<Point2> out;
  while (static_cast<int>(out.size()) < n) {
    const Point2 x{ux(rng), uy(rng)};
    if (d.contains(x)) out.push_back(x);
  }
  return out;
}

double pu_sum(const PartitionOfUnity& pu, Point2 x) {
  const int c = pu.locate(x);
  REQUIRE(c >= 0);
  std::array<PuEntry, 3> e;
  const int n = pu.eval(static_cast<std::size_t>(c), x, e);
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    CHECK(e[k].value >= -1e-14);
    CHECK(e[k].value <= 1.0 + 1e-14);
    s += e[k].value;
  }
  return s;
}

std::vector<std::vector<int>> cell_patches(const PartitionOfUnity& pu) {
  std::vector<std::vector<int>> out(pu.cells().size());
  for (std::size_t j = 0; j < pu.size(); ++j)
    for (int c : pu.patch_cells(j)) out[c].push_back(static_cast<int>(j));
  return out;
}

}  // namespace

TEST_CASE("structured unit square at scale 1/2") {
  const Mesh m = triangulate(Domain(unit_square()), 0.5, MeshScheme::structured);
  CHECK(m.num_vertices() == 9);
  CHECK(m.num_triangles() == 8);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) CHECK(m.triangle(t).signed_area() > 0.0);

  const MeshQuality q = mesh_quality(m);
  CHECK(q.max_circumradius_ratio == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(q.min_inradius_ratio == doctest::Approx(1.0 - std::sqrt(2.0) / 2));
  CHECK(q.max_overlap == 3);

  const PartitionOfUnity pu = PartitionOfUnity::lagrange(m);
  int center = -1;
  for (std::size_t i = 0; i < m.num_vertices(); ++i)
    if (distance(m.vertices[i], {0.5, 0.5}) < 1e-14) center = static_cast<int>(i);
  REQUIRE(center >= 0);
  CHECK(pu.value(center, {0.5, 0.5}) == doctest::Approx(1.0));
  std::size_t touching = 0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t)
    for (int v : m.triangles[t]) touching += (v == center);
  CHECK(pu.patch_cells(center).size() == touching);
}

TEST_CASE("oversized scales are refused with the limiting feature") {
  try {
    (void)triangulate(Domain(unit_square()), 2.0);
    FAIL("expected refusal");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("scale exceeds feature size") != std::string::npos);
  }
}

TEST_CASE("slit vertices are duplicated, the free tip is not") {
  const Domain d(slit_domain());
  const Mesh m = triangulate(d, 0.25);
  int on_slit = 0, tips = 0;
  std::map<std::pair<double, double>, std::set<SideTag>> tags;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const Point2 v = m.vertices[i];
    if (std::abs(v.y) < 1e-14 && v.x > 1e-14) {
      ++on_slit;
      tags[{v.x, v.y}].insert(m.side_tags[i]);
    }
    if (norm(v) < 1e-14) ++tips;
  }
  CHECK(tips == 1);
  CHECK(on_slit > 0);
  CHECK(static_cast<int>(tags.size()) * 2 == on_slit);
  for (const auto& [pt, s] : tags) CHECK(s == std::set<SideTag>{SideTag::upper, SideTag::lower});
  CHECK(m.duplicates.size() == tags.size());

  const PartitionOfUnity pu = PartitionOfUnity::lagrange(m);
  for (auto [a, b] : m.duplicates) {
    std::set<int> pa(pu.patch_cells(a).begin(), pu.patch_cells(a).end());
    for (int c : pu.patch_cells(b)) CHECK(pa.count(c) == 0);
    const int upper = m.side_tags[a] == SideTag::upper ? a : b;
    const int lower = upper == a ? b : a;
    const Point2 v = m.vertices[a];
    CHECK(pu.value(upper, v + Point2{0.0, -1e-7}) == 0.0);
    CHECK(pu.value(lower, v + Point2{0.0, 1e-7}) == 0.0);
    CHECK(pu.value(upper, v + Point2{0.0, 1e-7}) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("Lagrange partitions sum to one and overlap three times") {
  for (const DomainSpec& spec : {unit_square(), slit_domain(), l_shape(), pentagon()}) {
    const Domain d(spec);
    const PartitionOfUnity pu = PartitionOfUnity::lagrange(triangulate(d, 0.125));
    const auto owners = cell_patches(pu);
    double worst = 0.0;
    for (Point2 x : sample_points(d, 10000, 17)) {
      worst = std::max(worst, std::abs(pu_sum(pu, x) - 1.0));
      CHECK(owners[pu.locate(x)].size() == 3);
    }
    CHECK(worst <= 1e-12);
    CHECK(pu.max_overlap() == 3);
  }
}

TEST_CASE("gradient bound and patch diameters are stable across scales") {
  for (const DomainSpec& spec : {unit_square(), slit_domain(), l_shape(), pentagon()}) {
    const Domain d(spec);
    std::vector<double> grad, diam_lo, diam_hi, john;
    for (int k = 2; k <= 6; ++k) {
      const double ell = std::ldexp(1.0, -k);
      const PartitionOfUnity pu = PartitionOfUnity::lagrange(triangulate(d, ell));
      grad.push_back(pu.max_gradient() * ell);
      double lo = 1e300, hi = 0.0, r = 1e300;
      for (std::size_t j = 0; j < pu.size(); ++j) {
        lo = std::min(lo, pu.patch_diameter(j) / ell);
        hi = std::max(hi, pu.patch_diameter(j) / ell);
        r = std::min(r, pu.john_radius(j) / ell);
      }
      diam_lo.push_back(lo);
      diam_hi.push_back(hi);
      john.push_back(r);
    }
    std::vector<double> sorted = grad;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (double g : grad) {
      CHECK(g >= 0.8 * median);
      CHECK(g <= 1.2 * median);
    }
    for (double v : diam_lo) CHECK(v > 0.5);
    for (double v : diam_hi) CHECK(v < 6.0);
    for (double v : john) CHECK(v > 0.1);
  }
}

TEST_CASE("John balls lie inside their patches") {
  const Domain d(l_shape());
  const PartitionOfUnity pu = PartitionOfUnity::lagrange(triangulate(d, 0.125));
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t j = 0; j < pu.size(); ++j) {
    const std::set<int> patch(pu.patch_cells(j).begin(), pu.patch_cells(j).end());
    for (int k = 0; k < 50; ++k) {
      const double r = 0.999 * pu.john_radius(j) * std::sqrt(u(rng));
      const double t = 2.0 * M_PI * u(rng);
      const Point2 x = pu.john_center(j) + Point2{r * std::cos(t), r * std::sin(t)};
      CHECK(patch.count(pu.locate(x)) == 1);
    }
  }
}

TEST_CASE("mesh file round trip and malformed input") {
  const Mesh m = triangulate(Domain(slit_domain()), 0.5);
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh back = read_mesh(ss);
  CHECK(back.vertices == m.vertices);
  CHECK(back.triangles == m.triangles);
  CHECK(back.side_tags == m.side_tags);
  CHECK(back.duplicates == m.duplicates);

  std::stringstream dangling("v 0 0\nv 1 0\nt 0 1 7\n");
  CHECK_THROWS_WITH_AS((void)read_mesh(dangling), doctest::Contains("missing vertex 7"),
                       ValidationError);
  std::stringstream garbled("v 0 0\nv 1 zz\n");
  CHECK_THROWS_WITH_AS((void)read_mesh(garbled), doctest::Contains("line 2"), ValidationError);
}

TEST_CASE("straight snowflake partitions are plain Lagrange partitions") {
  const SnowflakePartition sp =
      snowflake_partition(uniform_plan(0.3, SnowflakeRule::straight, 3), 0.1);
  CHECK(sp.level == 2);
  CHECK(sp.pu.cells().size() == sp.pu.mesh().num_triangles());
  for (const PuCell& c : sp.pu.cells()) CHECK(c.tent == -1);
  for (Point2 x : sample_points(Domain(unit_square()), 2000, 5))
    CHECK(pu_sum(sp.pu, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extended snowflake partition") {
  const SnowflakePlan plan = uniform_plan(0.3, SnowflakeRule::bump, 4);
  const SnowflakePartition sp = snowflake_partition(plan, 0.09);
  CHECK(sp.level == 2);
  CHECK(sp.pu.extended());

  const Snowflake flake = build_snowflake(plan);
  const Domain d(DomainSpec{flake.curve.polygon(), {}, {}});
  const auto owners = cell_patches(sp.pu);
  double worst = 0.0;
  for (Point2 x : sample_points(d, 10000, 29)) {
    worst = std::max(worst, std::abs(pu_sum(sp.pu, x) - 1.0));
    CHECK(owners[sp.pu.locate(x)].size() <= 6);
  }
  CHECK(worst <= 1e-12);
  CHECK(sp.pu.max_overlap() <= 6);

  double lo = 1e300, hi = 0.0;
  for (std::size_t j = 0; j < sp.pu.size(); ++j) {
    lo = std::min(lo, sp.pu.patch_diameter(j) / 0.09);
    hi = std::max(hi, sp.pu.patch_diameter(j) / 0.09);
  }
  MESSAGE("snowflake patch diameter / ell in [" << lo << ", " << hi << "], C/c = " << hi / lo);
  CHECK(lo > 0.2);
  CHECK(hi < 10.0);

  CHECK_THROWS_AS(snowflake_partition(plan, 0.001), ValidationError);
}

TEST_CASE("snowflake level selection") {
  CHECK(snowflake_level(0.3, 0.09) == 2);
  CHECK(snowflake_level(0.3, 0.1) == 2);
  CHECK(snowflake_level(0.3, 0.3) == 1);
  CHECK(snowflake_level(0.3, 1.0) == 0);
}

TEST_CASE("partition JSON export lists one coefficient array per vertex") {
  const PartitionOfUnity pu = PartitionOfUnity::lagrange(triangulate(Domain(unit_square()), 0.5));
  const nlohmann::json j = partition_to_json(pu);
  REQUIRE(j["patches"].size() == pu.size());
  for (std::size_t k = 0; k < pu.size(); ++k) {
    CHECK(j["patches"][k]["coefficients"][std::to_string(k)] == 1.0);
    CHECK(j["patches"][k]["cells"].size() == pu.patch_cells(k).size());
  }
}
