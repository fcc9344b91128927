#include "fracinterp/seminorms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "fracinterp/errors.hpp"
#include "fracinterp/parallel.hpp"
#include "fracinterp/quadrature.hpp"

namespace fracinterp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double Exponents::conjugate() const {
  return p == 1.0 ? std::numeric_limits<double>::infinity() : p / (p - 1.0);
}

void Exponents::validate() const {
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("exponents: s must lie in (0,1), got " + std::to_string(s));
  if (!(p >= 1.0) || !std::isfinite(p))
    throw ValidationError("exponents: p must be finite and >= 1, got " + std::to_string(p));
}

// --- L^p and W^{1,p} ---------------------------------------------------------------

namespace {

template <class Fn>
double integrate_cells(std::span<const Triangle2> cells, int subdivision, Fn&& fn) {
  std::vector<double> per_cell(cells.size());
  const auto rule = triangle_rule_degree4();
  parallel_for(cells.size(), [&](std::size_t c) {
    double acc = 0.0;
    for (const auto& t : subdivide(cells[c], subdivision)) {
      const double area = t.area();
      double local = 0.0;
      for (const auto& q : rule) local += q.weight * fn(t.at(q.bary[0], q.bary[1], q.bary[2]));
      acc += area * local;
    }
    per_cell[c] = acc;
  });
  return pairwise_sum(per_cell);
}

}  // namespace

double lp_norm(const FieldFn& f, std::span<const Triangle2> cells, double p, int subdivision) {
  if (!(p >= 1.0)) throw ValidationError("lp_norm: p must be >= 1");
  const double integral =
      integrate_cells(cells, subdivision, [&](Point2 x) { return std::pow(std::abs(f(x)), p); });
  return std::pow(integral, 1.0 / p);
}

W1pNorm w1p_norm(const FieldFn& f, std::span<const Triangle2> cells, double p, int subdivision) {
  if (!(p >= 1.0)) throw ValidationError("w1p_norm: p must be >= 1");
  const double lp = integrate_cells(cells, subdivision, [&](Point2 x) {
    return std::pow(std::abs(f(x)), p);
  });
  const double gp = integrate_cells(cells, subdivision, [&](Point2 x) {
    return std::pow(norm(f.eval(x).gradient), p);
  });
  return {std::pow(lp + gp, 1.0 / p), std::pow(gp, 1.0 / p)};
}

// --- Gagliardo seminorms ---------------------------------------------------------------

namespace {

struct Engine {
  const FieldFn& f;
  std::span<const Exponents> exps;
  const Domain& domain;
  bool restricted;
  const SeminormOptions& opt;
  std::vector<Point2> vertices;
  const GaussRule& angular;
  const GaussRule& radial;

  Engine(const FieldFn& f_, std::span<const Exponents> e, const Domain& d, bool r,
         const SeminormOptions& o)
      : f(f_), exps(e), domain(d), restricted(r), opt(o),
        angular(gauss_legendre(o.angular_order)), radial(gauss_legendre(o.radial_order)) {
    if (!restricted) {
      auto v = domain.boundary_vertices();
      if (static_cast<int>(v.size()) <= opt.max_vertex_directions) vertices = std::move(v);
    }
  }

  /// Adds |df|^p r^(-sp) integrated in log r over [lo, hi] to acc.
  void log_panel(Point2 x, Point2 u, double fx, double lo, double hi, double w,
                 double* acc) const {
    const double tlo = std::log(lo);
    const double len = std::log(hi) - tlo;
    for (std::size_t k = 0; k < radial.nodes.size(); ++k) {
      const double t = tlo + radial.nodes[k] * len;
      const double r = std::exp(t);
      const double df = std::abs(f(x + r * u) - fx);
      if (df == 0.0) continue;
      const double ldf = std::log(df);
      const double wk = w * radial.weights[k] * len;
      for (std::size_t e = 0; e < exps.size(); ++e) {
        const double p = exps[e].p, sp = exps[e].s * exps[e].p;
        acc[e] += wk * std::exp(p * ldf - sp * t);
      }
    }
  }

  /// Inner integral at x, weighted by w, accumulated into acc.
  void inner(Point2 x, double w, double* acc) const {
    const FieldValue fx = f.eval(x);
    thread_local std::vector<double> breaks;
    thread_local std::vector<RayHit> hits;
    breaks.clear();
    for (int k = 0; k < opt.angular_sectors; ++k) breaks.push_back(kTwoPi * k / opt.angular_sectors);
    auto add_angle = [&](double a) {
      a = std::fmod(a, kTwoPi);
      if (a < 0.0) a += kTwoPi;
      breaks.push_back(a);
    };
    for (const auto& v : vertices) add_angle(std::atan2(v.y - x.y, v.x - x.x));
    if (norm(fx.gradient) > 0.0) {
      const double g = std::atan2(fx.gradient.y, fx.gradient.x);
      add_angle(g + 0.5 * std::numbers::pi);
      add_angle(g - 0.5 * std::numbers::pi);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double a, double b) { return b - a < 1e-12; }),
                 breaks.end());
    const double radius = restricted ? 0.5 * domain.distance_to_boundary(x) : 0.0;
    const int K = opt.radial_panels;

    const std::size_t nb = breaks.size();
    for (std::size_t i = 0; i < nb; ++i) {
      const double a0 = breaks[i];
      const double a1 = i + 1 < nb ? breaks[i + 1] : breaks[0] + kTwoPi;
      const double span = a1 - a0;
      if (span <= 0.0) continue;
      for (std::size_t q = 0; q < angular.nodes.size(); ++q) {
        const double theta = a0 + angular.nodes[q] * span;
        const double wt = w * angular.weights[q] * span;
        const Point2 u{std::cos(theta), std::sin(theta)};
        double first_end = radius;
        if (!restricted) {
          domain.ray_hits(x, u, hits);
          if (hits.empty()) continue;
          first_end = hits.front().t;
        }
        // First interval [0, first_end]: geometric panels toward r = 0 and
        // a linearized core.
        double hi = first_end;
        for (int k = 0; k < K; ++k) {
          log_panel(x, u, fx.value, 0.5 * hi, hi, wt, acc);
          hi *= 0.5;
        }
        const double slope = std::abs(dot(fx.gradient, u));
        if (slope > 0.0) {
          for (std::size_t e = 0; e < exps.size(); ++e) {
            const double p = exps[e].p, alpha = p - exps[e].s * p;
            acc[e] += wt * std::pow(slope, p) * std::pow(hi, alpha) / alpha;
          }
        }
        if (restricted) continue;
        // Later intervals inside the domain, split at slit crossings.
        bool inside = true;
        double start = hits.front().t;
        if (hits.front().toggles) inside = false;
        for (std::size_t h = 1; h < hits.size(); ++h) {
          const double t = hits[h].t;
          if (inside && t > start * (1.0 + 1e-14)) {
            const int n = std::clamp(static_cast<int>(std::ceil(std::log2(t / start))), 1, 48);
            const double ratio = std::pow(t / start, 1.0 / n);
            double lo = start;
            for (int k = 0; k < n; ++k) {
              const double next = k + 1 == n ? t : lo * ratio;
              log_panel(x, u, fx.value, lo, next, wt, acc);
              lo = next;
            }
          }
          if (hits[h].toggles) inside = !inside;
          start = t;
        }
      }
    }
  }
};

}  // namespace

std::vector<double> gagliardo_powers(const FieldFn& f, std::span<const Exponents> exps,
                                     const Domain& domain, std::span<const Triangle2> cells,
                                     bool restricted, const SeminormOptions& opt) {
  for (const auto& e : exps) e.validate();
  const std::size_t ne = exps.size();
  std::vector<double> out(ne, 0.0);
  if (f.is_constant() || ne == 0) return out;
  const Engine engine(f, exps, domain, restricted, opt);
  const auto rule = triangle_rule_degree4();
  std::vector<double> per_cell(cells.size() * ne, 0.0);
  parallel_for(
      cells.size(),
      [&](std::size_t c) {
        double* acc = per_cell.data() + c * ne;
        for (const auto& t : subdivide(cells[c], opt.outer_subdivision)) {
          const double area = t.area();
          for (const auto& q : rule) {
            const Point2 x = t.at(q.bary[0], q.bary[1], q.bary[2]);
            if (!domain.contains(x)) continue;
            engine.inner(x, area * q.weight, acc);
          }
        }
      },
      opt.threads);
  std::vector<double> column(cells.size());
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t c = 0; c < cells.size(); ++c) column[c] = per_cell[c * ne + e];
    out[e] = pairwise_sum(column);
  }
  return out;
}

bool detect_divergence(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 4) return false;
  double d[3];
  for (int k = 0; k < 3; ++k) d[k] = values[n - 3 + k] - values[n - 4 + k];
  if (!(d[0] > 0.0 && d[1] > 0.0 && d[2] > 0.0)) return false;
  if (d[1] < 0.9 * d[0] || d[2] < 0.9 * d[1]) return false;
  return d[2] > 1e-3 * std::abs(values[n - 1]);
}

std::vector<SeminormResult> gagliardo_sweep(const FieldFn& f, std::span<const Exponents> exps,
                                            const Domain& domain, const CoverFn& cover,
                                            int first_level, int last_level, bool restricted,
                                            const SeminormOptions& opt) {
  if (last_level < first_level) throw ValidationError("seminorm sweep: empty level range");
  std::vector<SeminormResult> res(exps.size());
  for (int level = first_level; level <= last_level; ++level) {
    const auto cells = cover(level);
    const auto powers = gagliardo_powers(f, exps, domain, cells, restricted, opt);
    for (std::size_t e = 0; e < exps.size(); ++e)
      res[e].history.push_back(std::pow(powers[e], 1.0 / exps[e].p));
  }
  for (auto& r : res) {
    r.value = r.history.back();
    r.refinement_level = last_level;
    r.error_estimate = r.history.size() > 1
                           ? std::abs(r.history.back() - r.history[r.history.size() - 2])
                           : 0.0;
    r.diverging = detect_divergence(r.history);
  }
  return res;
}

SeminormResult gagliardo_full(const FieldFn& f, const Exponents& e, const Domain& domain,
                              const CoverFn& cover, int first_level, int last_level,
                              const SeminormOptions& opt) {
  return gagliardo_sweep(f, {&e, 1}, domain, cover, first_level, last_level, false, opt).front();
}

SeminormResult gagliardo_restricted(const FieldFn& f, const Exponents& e, const Domain& domain,
                                    const CoverFn& cover, int first_level, int last_level,
                                    const SeminormOptions& opt) {
  return gagliardo_sweep(f, {&e, 1}, domain, cover, first_level, last_level, true, opt).front();
}

// --- Monte Carlo oracle ----------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ChunkStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  double max = 0.0;
};

}  // namespace

McResult mc_oracle(const FieldFn& f, const Exponents& e, const Domain& domain, bool restricted,
                   std::uint64_t n_samples, std::uint64_t seed, int threads) {
  e.validate();
  if (n_samples < 10000) throw ValidationError("mc_oracle: need at least 10^4 samples");
  McResult res;
  res.samples = n_samples;
  if (f.is_constant()) return res;

  const double p = e.p, alpha = p - e.s * p;
  const double area = domain.area();
  const Box2 box = domain.bounds();
  constexpr std::uint64_t kChunk = 1 << 14;
  const std::uint64_t chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<ChunkStats> stats(chunks);

  parallel_for(
      chunks,
      [&](std::size_t c) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(c + 1)));
        const std::uint64_t begin = c * kChunk;
        const std::uint64_t end = std::min(n_samples, begin + kChunk);
        ChunkStats st;
        for (std::uint64_t i = begin; i < end; ++i) {
          Point2 x;
          for (int tries = 0;; ++tries) {
            x = {box.lo.x + uniform01(rng) * box.width(), box.lo.y + uniform01(rng) * box.height()};
            if (domain.contains(x)) break;
            if (tries > 100000) throw NumericError("mc_oracle: rejection sampling failed");
          }
          const double theta = kTwoPi * uniform01(rng);
          const Point2 u{std::cos(theta), std::sin(theta)};
          double R;
          if (restricted) {
            R = 0.5 * domain.distance_to_boundary(x);
          } else {
            R = 0.0;
            for (Point2 corner : {box.lo, box.hi, Point2{box.lo.x, box.hi.y}, Point2{box.hi.x, box.lo.y}})
              R = std::max(R, distance(x, corner));
          }
          // r with density alpha r^(alpha-1) / R^alpha on (0, R).
          const double r = R * std::pow(1.0 - uniform01(rng), 1.0 / alpha);
          const Point2 y = x + r * u;
          double term = 0.0;
          if (r > 0.0 && (restricted || domain.contains(y))) {
            const double q = std::abs(f(y) - f(x)) / r;
            term = area * kTwoPi * std::pow(R, alpha) / alpha * std::pow(q, p);
          }
          st.sum += term;
          st.sum_sq += term * term;
          st.max = std::max(st.max, term);
        }
        stats[c] = st;
      },
      threads);

  std::vector<double> sums(chunks), squares(chunks);
  double max_term = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    sums[c] = stats[c].sum;
    squares[c] = stats[c].sum_sq;
    max_term = std::max(max_term, stats[c].max);
  }
  const double total = pairwise_sum(sums);
  const double total_sq = pairwise_sum(squares);
  const double n = static_cast<double>(n_samples);
  const double mean = total / n;
  const double var = std::max(0.0, total_sq / n - mean * mean);
  res.estimate = mean;
  res.std_error = std::sqrt(var / n);
  res.unstable = total > 0.0 && max_term > 0.05 * total;
  return res;
}

}  // namespace fracinterp
