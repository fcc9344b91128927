#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "dense_oracle.hpp"
#include "fracinterp/errors.hpp"
#include "fracinterp/kfunctional.hpp"
#include "fracinterp/model.hpp"

using namespace fracinterp;

namespace {

const std::shared_ptr<const DomainModel>& square() {
  static const auto m = polygon_model(Domain(unit_square()), "square");
  return m;
}

const std::shared_ptr<const DomainModel>& slit() {
  static const auto m = polygon_model(Domain(slit_domain()), "slit");
  return m;
}

double conj_factor(double p) { return std::pow(2.0, 1.0 - 1.0 / p); }

}  // namespace

TEST_CASE("constant functions") {
  const double c = 1.7;
  const FieldFn f = FieldFn::constant(c);
  const Mesh mesh = square()->fe_mesh(1.0 / 16);
  for (double p : {1.5, 2.0, 3.0})
    for (double ell : {0.05, 0.125, 0.5, 2.0}) {
      CAPTURE(p);
      CAPTURE(ell);
      const Decomposition d = k_upper_opt(f, ell, mesh, p);
      CHECK(d.value <= c * std::min(1.0, ell) * conj_factor(p) + 1e-12);
      CHECK(d.value <= std::min(c, ell * c) + 1e-12);
      CHECK(d.value >= 0.0);
    }

  auto pu = std::make_shared<const PartitionOfUnity>(square()->partition(0.125));
  for (double p : {1.5, 2.0}) {
    const Decomposition d = k_upper_constructive(f, 0.125, pu, p);
    CHECK(d.value == doctest::Approx(0.125 * c).epsilon(1e-12));
    CHECK(d.g_norm == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.h(Point2{0.3, 0.4}) == doctest::Approx(c).epsilon(1e-13));
  }
}

TEST_CASE("decompositions split f exactly") {
  const FieldFn f = FieldFn::parse("bump 0.5 0.5 0.35");
  const auto space = cached_fe_space(*square(), 1.0 / 16);
  const Decomposition d = k_upper_opt(f, 0.125, *space, 1.5);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int k = 0; k < 200; ++k) {
    const Point2 x{u(rng), u(rng)};
    CHECK(d.g(x) + d.h(x) == doctest::Approx(f(x)).epsilon(1e-12));
  }
  CHECK(d.value == doctest::Approx(d.g_norm + 0.125 * d.h_norm).epsilon(1e-12));
}

TEST_CASE("built-in comparisons bound the estimate") {
  const auto space = cached_fe_space(*square(), 1.0 / 16);
  for (const char* id : {"bump 0.3 0.7 0.25", "hat 0.5 0.5 0.25", "expr sin(3*x)*cos(2*y)"}) {
    const FieldFn f = FieldFn::parse(id);
    for (double p : {1.5, 2.0, 3.0}) {
      CAPTURE(id);
      CAPTURE(p);
      KOptions opt;
      const Decomposition d = k_upper_opt(f, 0.125, *space, p, opt);
      CHECK(d.value <= lp_norm(f, space->cells(), p, opt.norm_subdivision) + 1e-12);
      CHECK(d.converged);
    }
  }
}

TEST_CASE("functions in the FE space cost at most ell times their W^{1,p} norm") {
  const auto space = cached_fe_space(*square(), 0.125);
  std::vector<double> coeffs(space->dimension());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : coeffs) v = u(rng);
  const FieldFn f = FieldFn::discrete(space->basis(), coeffs);
  for (double p : {1.5, 2.0, 4.0}) {
    const double ell = 0.25;
    const Decomposition d = k_upper_opt(f, ell, *space, p);
    CHECK(d.value <= ell * w1p_norm(f, space->cells(), p).norm * (1.0 + 1e-12));
    // Every candidate lies in the FE space, so the surrogate minimizer is
    // within the power-mean factor of the best of them.
    CHECK(d.surrogate_value <= conj_factor(p) * d.value * (1.0 + 1e-9));
  }
}

TEST_CASE("p = 2 minimizer against a dense reference solve") {
  const Mesh mesh = triangulate(Domain(unit_square()), 0.25, MeshScheme::structured);
  std::vector<double> fn(mesh.num_vertices());
  for (std::size_t i = 0; i < fn.size(); ++i) fn[i] = mesh.vertices[i].x;
  const double ell = 0.5;
  const oracle::P2Minimizer ref = oracle::p2_minimizer(mesh, fn, ell);
  const Decomposition d = k_upper_opt(FieldFn::linear(1, 0, 0), ell, mesh, 2.0);
  REQUIRE(d.coefficients.size() == ref.coefficients.size());
  for (std::size_t i = 0; i < fn.size(); ++i)
    CHECK(d.coefficients[i] == doctest::Approx(ref.coefficients[i]).epsilon(1e-8));
  CHECK(d.surrogate_value == doctest::Approx(ref.value).epsilon(1e-8));
}

TEST_CASE("IRLS failure is reported with diagnostics") {
  KOptions opt;
  opt.irls_max_iterations = 1;
  opt.irls_tolerance = 1e-300;
  const Mesh mesh = square()->fe_mesh(0.125);
  CHECK_THROWS_WITH_AS(k_upper_opt(FieldFn::parse("bump 0.5 0.5 0.35"), 0.25, mesh, 3.0, opt),
                       doctest::Contains("did not converge"), NumericError);
  CHECK_THROWS_AS(k_upper_opt(FieldFn::constant(1.0), 0.25, mesh, 1.0), ValidationError);
}

TEST_CASE("ball averages") {
  const FieldFn lin = FieldFn::linear(2.0, -1.0, 0.5);
  CHECK(ball_average(lin, {0.3, 0.6}, 0.1) == doctest::Approx(lin({0.3, 0.6})).epsilon(1e-13));
  CHECK(ball_average(FieldFn::constant(-4.0), {0.0, 0.0}, 1.0) == doctest::Approx(-4.0));
  const FieldFn quad = FieldFn::expression("x^2");
  const double avg = ball_average(quad, {0.0, 0.0}, 1.0);
  CHECK(avg > 0.0);
  CHECK(avg < 0.5);
}

TEST_CASE("scale grids") {
  const ScaleGrid g{0.25, 0.5, 6};
  const auto s = g.scales();
  REQUIRE(s.size() == 6);
  CHECK(s.front() == 0.25);
  CHECK(s.back() == doctest::Approx(0.25 / 32));
  CHECK_THROWS_AS((ScaleGrid{0.25, 0.5, 3}.validate()), ValidationError);
  CHECK_THROWS_AS((ScaleGrid{0.25, 1.0, 6}.validate()), ValidationError);
  CHECK_THROWS_AS((ScaleGrid{-1.0, 0.5, 6}.validate()), ValidationError);

  const ScaleGrid sq = default_grid(*square());
  CHECK(sq.tau == doctest::Approx(std::sqrt(2.0) / 8));
  CHECK(sq.count == 6);
  const ScaleGrid sl = default_grid(*slit());
  CHECK(sl.tau == doctest::Approx(0.25));

  const auto flake = snowflake_model(uniform_plan(0.3, SnowflakeRule::bump, 4), "flake");
  const ScaleGrid fg = default_grid(*flake);
  CHECK(fg.count >= 4);
  CHECK(fg.scales().back() >= flake->min_partition_scale());
}

TEST_CASE("profile of a constant: exact tail and head") {
  const double c = 2.0;
  const Exponents e{0.5, 2.0};
  const ScaleGrid grid{0.25, 0.5, 6};
  const KProfile prof = interp_seminorm(FieldFn::constant(c), e, grid, *square());
  const double lmin = 0.25 / 32;
  CHECK(prof.f_lp == doctest::Approx(c));
  CHECK(prof.tail_bound == doctest::Approx(c * c * std::pow(0.25, -1.0) / 1.0).epsilon(1e-12));
  CHECK(prof.head_bounded);
  CHECK(prof.head_gap == doctest::Approx(c * c * lmin / 1.0).epsilon(1e-12));
  CHECK(std::isfinite(prof.interp_value));
  CHECK(prof.interp_value > 0.0);
  CHECK(prof.interp_value ==
        doctest::Approx(interp_from_k(prof.scales, prof.k_opt, e, grid.ratio, prof.tail_bound)));
  CHECK(prof.surrogate_factor == doctest::Approx(std::sqrt(2.0)));
  for (std::size_t k = 0; k < prof.scales.size(); ++k)
    CHECK(prof.k_opt[k] <= c * prof.scales[k] + 1e-12);
}

TEST_CASE("profile invariants on the square") {
  const Exponents e{0.5, 1.5};
  const KProfile prof =
      interp_seminorm(FieldFn::parse("hat 0.5 0.5 0.25"), e, default_grid(*square()), *square());
  CHECK(prof.monotone);
  CHECK(prof.concave);
  for (std::size_t k = 0; k < prof.scales.size(); ++k) {
    CHECK(prof.k_opt[k] >= 0.0);
    CHECK(prof.k_opt[k] <= std::min(prof.f_lp, prof.k_constructive[k]) + 1e-12);
    CHECK(prof.k_opt[k] <= prof.k_opt_direct[k] + 1e-12);
    if (k > 0) CHECK(prof.k_opt[k] <= prof.k_opt[k - 1] + 1e-12);
  }
  CHECK(prof.interp_constructive >= prof.interp_opt);
  CHECK(prof.max_constructive_ratio >= 1.0);

  const KProfile other = with_smoothness(prof, 0.3);
  CHECK(other.exponents.s == 0.3);
  CHECK(other.k_opt == prof.k_opt);
  CHECK(other.tail_bound == doctest::Approx(std::pow(prof.f_lp, 1.5) * std::pow(prof.grid.tau, -0.45) / 0.45));
  CHECK(other.interp_opt ==
        doctest::Approx(interp_from_k(other.scales, other.k_opt, other.exponents, other.grid.ratio,
                                      other.tail_bound)));

  const nlohmann::json j = kprofile_to_json(prof);
  for (const char* key : {"scales", "k_opt", "k_constructive", "interp_value", "tail_bound",
                          "head_gap", "surrogate_factor"})
    CHECK(j.contains(key));
  CHECK(j["surrogate_factor"].get<double>() == doctest::Approx(std::pow(2.0, 1.0 / 3.0)));
  const std::string csv = kprofile_to_csv(prof);
  CHECK(csv.rfind("scale,k_opt,k_constructive", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(prof.scales.size()) + 1);
}

TEST_CASE("a function outside W^{1,p} has an unbounded head") {
  const Exponents e{0.8, 2.5};
  REQUIRE_FALSE(FieldFn::slit_angle().in_w1p(2.5).value_or(true));
  const KProfile prof = interp_seminorm(FieldFn::slit_angle(), e, ScaleGrid{0.25, 0.5, 4}, *slit());
  CHECK_FALSE(prof.head_bounded);
  CHECK(std::isinf(prof.head_gap));
  CHECK(std::isfinite(prof.interp_value));
}

TEST_CASE("FE spaces are shared through the cache") {
  const auto a = cached_fe_space(*square(), 0.0625);
  const auto b = cached_fe_space(*square(), 0.0625);
  CHECK(a.get() == b.get());
  CHECK(a->dimension() == a->mesh().num_vertices());
}

TEST_CASE("per-scale failures carry the scale index") {
  KOptions opt;
  opt.irls_max_iterations = 1;
  opt.irls_tolerance = 1e-300;
  CHECK_THROWS_WITH_AS(interp_seminorm(FieldFn::parse("bump 0.5 0.5 0.35"), {0.5, 3.0},
                                       ScaleGrid{0.25, 0.5, 4}, *square(), KMethod::opt, opt),
                       doctest::Contains("scale 0"), NumericError);
}
