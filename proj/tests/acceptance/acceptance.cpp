// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Criteria can be selected by number on
// the command line, e.g. `acceptance 5 8`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dense_oracle.hpp"
#include "experiment.hpp"
#include "fracinterp/kfunctional.hpp"
#include "fracinterp/model.hpp"
#include "fracinterp/parallel.hpp"
#include "fracinterp/seminorms.hpp"
#include "fracinterp/snowflake.hpp"

using namespace fracinterp;

namespace {

class Checks {
 public:
  void check(bool ok, const std::string& what) {
    std::printf("    [%s] %s\n", ok ? "ok" : "not ok", what.c_str());
    std::fflush(stdout);
    all_ &= ok;
  }
  [[nodiscard]] bool passed() const { return all_; }

 private:
  bool all_ = true;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_change(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Slit counterexample

void criterion_1(Checks& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = app::load_model("slit");
  const FieldFn f = FieldFn::slit_angle();
  const Exponents e{0.8, 1.5};
  const CoverFn cover = app::level_cover(model);

  const SeminormResult full = gagliardo_full(f, e, model->domain(), cover, 3, 6);
  const SeminormResult res = gagliardo_restricted(f, e, model->domain(), cover, 3, 6);
  std::string hist = "full by level 3..6:";
  for (double v : full.history) hist += fmt(" %.5g", v);
  std::printf("    %s\n", hist.c_str());

  bool factor_ok = true;
  std::string factors = "full growth factor >= 1.5 per level, observed:";
  for (std::size_t k = 1; k < full.history.size(); ++k) {
    const double r = full.history[k] / full.history[k - 1];
    factors += fmt(" %.4f", r);
    factor_ok &= r >= 1.5;
  }
  c.check(factor_ok, factors);
  c.check(full.diverging, "full seminorm flagged diverging");

  const auto& rh = res.history;
  const double rchange = rel_change(rh[rh.size() - 1], rh[rh.size() - 2]);
  c.check(!res.diverging && rchange <= 0.10,
          fmt("restricted change over the last two levels %.4f%% <= 10%% (values %.6g, %.6g)",
              100 * rchange, rh[rh.size() - 2], rh.back()));

  ScaleGrid grid = default_grid(*model, 6);
  const KProfile six = interp_seminorm(f, e, grid, *model, KMethod::opt);
  grid.count = 8;
  const KProfile eight = interp_seminorm(f, e, grid, *model, KMethod::opt);
  const double ichange = rel_change(six.interp_opt, eight.interp_opt);
  c.check(std::isfinite(six.interp_opt) && ichange <= 0.10,
          fmt("interp seminorm 6 -> 8 scales: %.6g -> %.6g, change %.3f%% <= 10%%", six.interp_opt,
              eight.interp_opt, 100 * ichange));

  const double secs = seconds_since(t0);
  c.check(secs <= 600.0, fmt("runtime %.0f s <= 600 s", secs));
}

// ---------------------------------------------------------------------------
// 2 and 3 share one experiment over the square, slit and snowflake domains.

const app::Report& equivalence_report(double* seconds) {
  static double secs = 0.0;
  static const app::Report rep = [] {
    const auto t0 = std::chrono::steady_clock::now();
    app::ExperimentConfig cfg = app::default_config("custom");
    app::Report r = app::run_experiment(cfg, 0);
    secs = seconds_since(t0);
    return r;
  }();
  if (seconds) *seconds = secs;
  return rep;
}

void suite_checks(Checks& c, const app::Report& rep) {
  std::set<std::string> fns;
  std::set<std::string> domains;
  int failed = 0;
  for (const auto& r : rep.records) {
    fns.insert(r.fn);
    domains.insert(r.domain);
    if (!r.error.empty()) {
      ++failed;
      std::printf("    error in %s / %s: %s\n", r.domain.c_str(), r.fn.c_str(), r.error.c_str());
    }
  }
  c.check(fns.size() >= 8, fmt("suite has %zu functions (>= 8) over %zu domains", fns.size(), domains.size()));
  c.check(failed == 0, fmt("%d failed records", failed));
}

void criterion_2(Checks& c) {
  double secs = 0.0;
  const app::Report& rep = equivalence_report(&secs);
  suite_checks(c, rep);
  double worst = 0.0;
  std::string where;
  int conflicts = 0;
  for (const auto& r : rep.records) {
    if (!r.error.empty() || !r.profile || !std::isfinite(r.profile->interp_opt)) continue;
    if (r.c_interp_to_restricted > worst) {
      worst = r.c_interp_to_restricted;
      where = fmt("%s / %s (s=%.1f, p=%.1f)", r.domain.c_str(), r.fn.c_str(), r.exponents.s, r.exponents.p);
    }
    if (r.restricted_diverging && r.interp_stable) {
      ++conflicts;
      std::printf("    restricted diverges while interp is stable: %s / %s\n", r.domain.c_str(), r.fn.c_str());
    }
  }
  c.check(worst <= 100.0, fmt("max restricted / (lp + interp) = %.4g <= 100 at %s", worst, where.c_str()));
  c.check(conflicts == 0, fmt("%d cases with diverging restricted and stable interp", conflicts));
  c.check(secs <= 1200.0, fmt("runtime %.0f s <= 1200 s", secs));
}

void criterion_3(Checks& c) {
  const app::Report& rep = equivalence_report(nullptr);
  suite_checks(c, rep);
  double worst = 0.0;
  std::string where;
  bool chain = true;
  for (const auto& r : rep.records) {
    if (!r.error.empty() || !r.profile) continue;
    if (r.c_restricted_to_interp > worst) {
      worst = r.c_restricted_to_interp;
      where = fmt("%s / %s (s=%.1f, p=%.1f)", r.domain.c_str(), r.fn.c_str(), r.exponents.s, r.exponents.p);
    }
    const KProfile& prof = *r.profile;
    for (std::size_t k = 0; k < prof.scales.size(); ++k)
      chain &= prof.k_opt[k] <= std::min(prof.f_lp, prof.k_constructive[k]);
  }
  c.check(worst <= 100.0,
          fmt("max interp(constructive) / (lp + restricted) = %.4g <= 100 at %s", worst, where.c_str()));
  c.check(chain, "K_opt <= min(||f||_p, K_constructive) at every scale of every profile");
}

// ---------------------------------------------------------------------------
// 4. K-functional properties on random cases

void criterion_4(Checks& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(app::substream(12345, "criterion-4"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> domains{"square", "slit"};
  const std::vector<double> ps{1.5, 2.0, 3.0};

  int bound_fail = 0, mono_fail = 0, conc_fail = 0, fe_fail = 0, fe_cases = 0;
  for (int k = 0; k < 20; ++k) {
    const std::string dname = domains[k % 2];
    const auto model = app::load_model(dname);
    const double p = ps[rng() % ps.size()];
    // ell in [1/32, 1/8], so the profile grid below tops out at 8 ell <= 1.
    const double ell = std::exp(std::log(1.0 / 32) + u(rng) * std::log(4.0));
    const Box2& box = model->domain().bounds();
    const Point2 center{box.lo.x + (0.25 + 0.5 * u(rng)) * box.width(),
                        box.lo.y + (0.25 + 0.5 * u(rng)) * box.height()};
    KOptions opt;
    const auto space = cached_fe_space(*model, ell / opt.fe_refinement);

    FieldFn f;
    std::string label;
    bool in_fe = false;
    switch (k % 4) {
      case 0:
        label = fmt("bump %.3f %.3f %.3f", center.x, center.y, 0.2 + 0.3 * u(rng));
        f = FieldFn::parse(label);
        break;
      case 1:
        label = fmt("hat %.3f %.3f %.3f", center.x, center.y, 0.2 + 0.2 * u(rng));
        f = FieldFn::parse(label);
        break;
      case 2:
        label = fmt("expr sin(%.3f*x)*cos(%.3f*y)", 1 + 4 * u(rng), 1 + 4 * u(rng));
        f = FieldFn::parse(label);
        break;
      default: {
        // Smooth nodal data, so that ell ||f||_W1p competes with ||f||_p.
        const double a = 1 + 3 * u(rng), b = 1 + 3 * u(rng), phase = 6 * u(rng);
        std::vector<double> coeffs(space->dimension());
        const auto& verts = space->mesh().vertices;
        for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] = std::sin(a * verts[i].x + b * verts[i].y + phase);
        f = FieldFn::discrete(space->basis(), coeffs);
        label = fmt("FE interpolant of sin(%.2fx+%.2fy)", a, b);
        in_fe = true;
      }
    }

    const Decomposition d = k_upper_opt(f, ell, *space, p, opt);
    const double lp = lp_norm(f, space->cells(), p, opt.norm_subdivision);
    if (!(d.value <= lp)) ++bound_fail;
    if (in_fe) {
      ++fe_cases;
      const double w = w1p_norm(f, space->cells(), p, opt.norm_subdivision).norm;
      if (!(d.value <= ell * w)) ++fe_fail;
    }

    // Profile on a grid whose finest scale is ell.
    const ScaleGrid grid{ell * 8.0, 0.5, 4};
    const KProfile prof = interp_seminorm(f, {0.5, p}, grid, *model, KMethod::opt, opt);
    bool mono = true, conc = true;
    for (std::size_t i = 1; i < prof.scales.size(); ++i) mono &= prof.k_opt[i] <= prof.k_opt[i - 1];
    // Slopes over increasing ell must not increase by more than 5%.
    std::vector<double> slopes;
    for (std::size_t i = prof.scales.size() - 1; i > 0; --i)
      slopes.push_back((prof.k_opt[i - 1] - prof.k_opt[i]) / (prof.scales[i - 1] - prof.scales[i]));
    for (std::size_t i = 1; i < slopes.size(); ++i)
      conc &= slopes[i] <= slopes[i - 1] * 1.05 + 1e-15;
    mono &= prof.monotone;
    conc &= prof.concave;
    mono_fail += !mono;
    conc_fail += !conc;
    std::printf("    case %2d: %-6s p=%.1f ell=%.4f %-32s K=%.5g ||f||_p=%.5g (%s)\n", k, dname.c_str(), p,
                ell, label.c_str(), d.value, lp, d.candidate.c_str());
  }
  c.check(bound_fail == 0, fmt("K_est <= ||f||_p in %d/20 cases", 20 - bound_fail));
  c.check(mono_fail == 0, fmt("K_est nondecreasing over the grid in %d/20 cases", 20 - mono_fail));
  c.check(conc_fail == 0, fmt("slope check within 5%% in %d/20 cases", 20 - conc_fail));
  c.check(fe_fail == 0, fmt("K_est <= ell ||f||_W1p for FE functions in %d/%d cases", fe_cases - fe_fail, fe_cases));
  const double secs = seconds_since(t0);
  c.check(secs <= 300.0, fmt("runtime %.0f s <= 300 s", secs));
}

// ---------------------------------------------------------------------------
// 5. Quadrature against the Monte Carlo oracle

void criterion_5(Checks& c) {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::uint64_t kSeed = 12345;
  constexpr std::uint64_t kSamples = 10'000'000;
  constexpr int kLevel = 5;
  const auto model = app::load_model("square");
  const Domain& d = model->domain();
  const Exponents e{0.5, 2.0};
  const auto cells = app::level_cover(model)(kLevel);
  const std::vector<std::string> fns{"linear 1 0 0", "linear 0.5 -1 0.2", "bump 0.5 0.5 0.35",
                                     "bump 0.3 0.7 0.25", "expr sin(3*x)*cos(2*y)"};
  for (const auto& id : fns) {
    const FieldFn f = FieldFn::parse(id);
    for (bool restricted : {false, true}) {
      const double q = gagliardo_powers(f, std::span(&e, 1), d, cells, restricted)[0];
      const McResult mc =
          mc_oracle(f, e, d, restricted, kSamples, app::substream(kSeed, id + (restricted ? "|r" : "|f")));
      const double z = std::abs(q - mc.estimate) / mc.std_error;
      c.check(z <= 3.0 && !mc.unstable, fmt("%-24s %-10s quadrature %.6g, oracle %.6g +- %.2g, |z| = %.2f", id.c_str(),
                                             restricted ? "restricted" : "full", q, mc.estimate, mc.std_error, z));
      if (id == "linear 1 0 0" && !restricted) {
        const double v = std::sqrt(q), ref = std::sqrt(mc.estimate);
        c.check(std::abs(v - ref) <= 0.02 * ref,
                fmt("f = x full seminorm %.6g vs oracle %.6g: relative gap %.3f%% <= 2%%", v, ref,
                    100 * std::abs(v - ref) / ref));
      }
    }
  }
  const double secs = seconds_since(t0);
  c.check(secs <= 600.0, fmt("runtime %.0f s <= 600 s", secs));
}

// ---------------------------------------------------------------------------
// 6. Lipschitz equivalence on the square

void criterion_6(Checks& c) {
  const app::Report rep = app::run_experiment(app::default_config("lipschitz-equivalence"), 0);
  double lo = INFINITY, hi = 0.0;
  int failed = 0, counted = 0;
  for (const auto& r : rep.records) {
    if (!r.error.empty()) {
      ++failed;
      continue;
    }
    if (!(r.restricted_history.back() > 0.0)) continue;  // constants: both seminorms vanish
    ++counted;
    lo = std::min(lo, r.full_over_restricted);
    hi = std::max(hi, r.full_over_restricted);
  }
  c.check(failed == 0, fmt("%d failed records", failed));
  c.check(lo >= 1.0 && hi <= 50.0,
          fmt("full / restricted in [%.4g, %.4g] over %d (f, s, p) cases, required within [1, 50]", lo, hi, counted));
}

// ---------------------------------------------------------------------------
// 7. Geometry and meshing invariants

double pu_sum_error(const PartitionOfUnity& pu, const Domain& d, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Box2& b = d.bounds();
  std::uniform_real_distribution<double> ux(b.lo.x, b.hi.x), uy(b.lo.y, b.hi.y);
  double worst = 0.0;
  std::array<PuEntry, 3> e;
  for (int k = 0; k < n;) {
    const Point2 x{ux(rng), uy(rng)};
    if (!d.contains(x)) continue;
    ++k;
    const int cell = pu.locate(x);
    if (cell < 0) return INFINITY;
    const int m = pu.eval(static_cast<std::size_t>(cell), x, e);
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += e[i].value;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void criterion_7(Checks& c) {
  const SnowflakePlan flake_plan = app::default_snowflake_plan();
  const auto flake = app::load_model("snowflake");
  const DomainSpec lshape{{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}, {}, {}};
  DomainSpec pentagon;
  for (int k = 0; k < 5; ++k)
    pentagon.outer.push_back({std::cos(0.3 + 2 * M_PI * k / 5), std::sin(0.3 + 2 * M_PI * k / 5)});

  // Partition of unity identity.
  for (const auto& [name, model] : std::vector<std::pair<std::string, std::shared_ptr<const DomainModel>>>{
           {"square", app::load_model("square")}, {"slit", app::load_model("slit")}, {"snowflake", flake}}) {
    const double ell = name == "snowflake" ? 0.09 : 0.0625;
    const double err = pu_sum_error(model->partition(ell), model->domain(), 10000, 71);
    c.check(err <= 1e-12, fmt("%s: max |sum psi - 1| = %.2e over 10^4 points", name.c_str(), err));
  }

  // Gradient bound across five scales.
  for (const auto& [name, spec] : std::vector<std::pair<std::string, DomainSpec>>{
           {"square", unit_square()}, {"slit", slit_domain()}, {"L-shape", lshape}, {"pentagon", pentagon}}) {
    const Domain d(spec);
    std::vector<double> g;
    for (int k = 2; k <= 6; ++k) {
      const double ell = std::ldexp(1.0, -k);
      g.push_back(PartitionOfUnity::lagrange(triangulate(d, ell)).max_gradient() * ell);
    }
    std::vector<double> sorted = g;
    std::sort(sorted.begin(), sorted.end());
    const double mid = sorted[2];
    bool ok = true;
    std::string vals;
    for (double v : g) {
      ok &= v >= 0.8 * mid && v <= 1.2 * mid;
      vals += fmt(" %.4f", v);
    }
    c.check(ok, fmt("%s: max|grad psi| * ell for ell = 2^-2..2^-6:%s (within 20%% of median)", name.c_str(), vals.c_str()));
  }

  // Side separation on the slit.
  {
    const Mesh m = triangulate(Domain(slit_domain()), 0.0625);
    const PartitionOfUnity pu = PartitionOfUnity::lagrange(m);
    bool ok = !m.duplicates.empty();
    for (auto [a, b] : m.duplicates) {
      const auto& pa = pu.patch_cells(a);
      for (int cell : pu.patch_cells(b)) ok &= std::find(pa.begin(), pa.end(), cell) == pa.end();
      ok &= m.side_tags[a] != m.side_tags[b];
    }
    c.check(ok, fmt("slit: %zu duplicated vertices with disjoint upper/lower supports", m.duplicates.size()));
  }

  // Snowflake statistics and simplicity.
  {
    std::mt19937_64 rng(app::substream(12345, "criterion-7"));
    bool stats_ok = true, simple_ok = true;
    int plans = 0;
    for (double p : {0.26, 0.3, 0.35, 0.45})
      for (int n = 0; n <= 6; ++n)
        for (int variant = 0; variant < 3; ++variant) {
          SnowflakePlan plan{p, {}};
          for (int g = 0; g < n; ++g) {
            const SnowflakeRule r = variant == 0   ? SnowflakeRule::bump
                                    : variant == 1 ? SnowflakeRule::straight
                                                   : ((rng() & 1u) ? SnowflakeRule::bump : SnowflakeRule::straight);
            plan.rules.push_back({r});
          }
          ++plans;
          try {
            const Snowflake s = build_snowflake(plan);
            const SnowflakeStats a = snowflake_stats(plan);
            const SnowflakeStats b = measure_polygon(s.curve.polygon());
            stats_ok &= a.segment_count == b.segment_count &&
                        std::abs(a.perimeter - b.perimeter) <= 1e-12 * a.perimeter &&
                        std::abs(a.min_segment_length - b.min_segment_length) <= 1e-12 * a.min_segment_length;
          } catch (const std::exception& ex) {
            simple_ok = false;
            std::printf("    p=%.2f N=%d: %s\n", p, n, ex.what());
          }
        }
    c.check(stats_ok, fmt("snowflake_stats matches the built polygon to 1e-12 for %d plans with N <= 6", plans));
    c.check(simple_ok, "every snowflake curve with N <= 6 and p in {0.26, 0.3, 0.35, 0.45} is simple");
  }

  // Restricted pairs are joined inside the domain.
  for (const auto& [name, d] : std::vector<std::pair<std::string, Domain>>{
           {"square", Domain(unit_square())}, {"slit", Domain(slit_domain())}, {"L-shape", Domain(lshape)},
           {"snowflake", flake->domain()}}) {
    std::mt19937_64 rng(app::substream(12345, "pairs|" + name));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Box2& b = d.bounds();
    int restricted = 0, bad = 0;
    for (int k = 0; k < 10000;) {
      const Point2 x{b.lo.x + u(rng) * b.width(), b.lo.y + u(rng) * b.height()};
      if (!d.contains(x)) continue;
      ++k;
      const double r = u(rng) * d.boundary_distance(x);
      const double t = 2.0 * M_PI * u(rng);
      const Point2 y = x + Point2{r * std::cos(t), r * std::sin(t)};
      if (d.in_restricted_pair(x, y)) {
        ++restricted;
        bad += !d.segment_in_domain(x, y);
      }
    }
    c.check(bad == 0 && restricted > 0,
            fmt("%s: %d restricted pairs among 10^4, %d not joined inside", name.c_str(), restricted, bad));
  }
}

// ---------------------------------------------------------------------------
// 8. p = 2 sparse solve against a dense reference

void criterion_8(Checks& c) {
  struct Case {
    double ell;
    double h;
  };
  for (const Case cs : {Case{0.25, 0.125}, Case{0.125, 0.03125}}) {
    const Mesh mesh = triangulate(Domain(unit_square()), cs.h, MeshScheme::structured);
    std::vector<double> fn(mesh.num_vertices());
    for (std::size_t i = 0; i < fn.size(); ++i) fn[i] = mesh.vertices[i].x;
    const oracle::P2Minimizer ref = oracle::p2_minimizer(mesh, fn, cs.ell);
    const Decomposition d = k_upper_opt(FieldFn::linear(1, 0, 0), cs.ell, mesh, 2.0);

    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < fn.size(); ++i) {
      worst = std::max(worst, std::abs(d.coefficients[i] - ref.coefficients[i]));
      scale = std::max(scale, std::abs(ref.coefficients[i]));
    }
    // Trivial candidates in closed form: ||x||_2 = 1/sqrt(3) and ell ||x||_W12 = ell sqrt(4/3).
    const double k_ref = std::min({ref.value, 1.0 / std::sqrt(3.0), cs.ell * std::sqrt(4.0 / 3.0)});
    const int n = static_cast<int>(std::lround(1.0 / cs.h));
    c.check(worst <= 1e-8 * scale,
            fmt("ell=%g, %dx%d mesh: max coefficient gap %.2e (relative %.2e)", cs.ell, n, n, worst, worst / scale));
    c.check(std::abs(d.surrogate_value - ref.value) <= 1e-8 * ref.value,
            fmt("ell=%g, %dx%d mesh: surrogate value %.12g vs dense %.12g", cs.ell, n, n, d.surrogate_value, ref.value));
    c.check(std::abs(d.value - k_ref) <= 1e-8 * k_ref,
            fmt("ell=%g, %dx%d mesh: K_est %.12g (%s) vs dense %.12g", cs.ell, n, n, d.value, d.candidate.c_str(), k_ref));
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Checks&)>>> criteria{
      {"slit counterexample", criterion_1},
      {"restricted seminorm bounded by lp + interpolation seminorm", criterion_2},
      {"constructive interpolation seminorm bounded by lp + restricted", criterion_3},
      {"K-functional properties on 20 random cases", criterion_4},
      {"quadrature agrees with the Monte Carlo oracle", criterion_5},
      {"full / restricted ratio on the square", criterion_6},
      {"geometry and meshing invariants", criterion_7},
      {"p = 2 solve against a dense reference", criterion_8},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    std::printf("criterion %d: %s\n", id, criteria[k].first.c_str());
    std::fflush(stdout);
    Checks checks;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[k].second(checks);
    } catch (const std::exception& e) {
      checks.check(false, std::string("exception: ") + e.what());
    }
    const bool ok = checks.passed();
    failures += !ok;
    std::printf("%s criterion %d (%s) [%.1f s]\n\n", ok ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
