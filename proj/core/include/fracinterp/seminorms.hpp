#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fracinterp/field.hpp"
#include "fracinterp/geometry.hpp"

namespace fracinterp {

/// Smoothness s in (0,1) and integrability p in [1, inf).
struct Exponents {
  double s = 0.5;
  double p = 2.0;

  /// p' with 1/p + 1/p' = 1 (infinity for p = 1).
  [[nodiscard]] double conjugate() const;
  /// Throws ValidationError unless 0 < s < 1 and p >= 1.
  void validate() const;
};

struct SeminormResult {
  double value = 0.0;
  int refinement_level = 0;
  double error_estimate = 0.0;  ///< |value - previous level value|
  bool diverging = false;
  std::vector<double> history;  ///< values at each computed level
};

/// L^p norm over a set of cells with the degree-4 triangle rule, each cell
/// split `subdivision` times.
double lp_norm(const FieldFn& f, std::span<const Triangle2> cells, double p, int subdivision = 0);

struct W1pNorm {
  double norm = 0.0;           ///< (||f||_p^p + ||grad f||_p^p)^(1/p)
  double grad_seminorm = 0.0;  ///< ||grad f||_p
};

W1pNorm w1p_norm(const FieldFn& f, std::span<const Triangle2> cells, double p, int subdivision = 0);

struct SeminormOptions {
  int angular_sectors = 16;   ///< uniform angular panels
  int angular_order = 4;      ///< Gauss points per angular panel
  int radial_order = 4;       ///< Gauss points per radial panel (in log r)
  int radial_panels = 12;     ///< geometric panels before the linearized core
  int outer_subdivision = 0;  ///< extra splits of each outer cell
  int max_vertex_directions = 256;
  int threads = 0;
};

/// p-th powers of the Gagliardo seminorm for several exponent pairs at once.
/// The outer integral runs over `cells` (a cover of the domain); the inner
/// integral is done in polar coordinates about each outer node, over the
/// part of each ray inside the domain (full) or over the disk of radius
/// d(x)/2 (restricted).
std::vector<double> gagliardo_powers(const FieldFn& f, std::span<const Exponents> exps,
                                     const Domain& domain, std::span<const Triangle2> cells,
                                     bool restricted, const SeminormOptions& opt = {});

/// Cells of the outer quadrature at refinement level L (scale 2^-L).
using CoverFn = std::function<std::vector<Triangle2>(int level)>;

/// Runs levels first..last and returns one result per exponent pair.
std::vector<SeminormResult> gagliardo_sweep(const FieldFn& f, std::span<const Exponents> exps,
                                            const Domain& domain, const CoverFn& cover,
                                            int first_level, int last_level, bool restricted,
                                            const SeminormOptions& opt = {});

SeminormResult gagliardo_full(const FieldFn& f, const Exponents& e, const Domain& domain,
                              const CoverFn& cover, int first_level, int last_level,
                              const SeminormOptions& opt = {});
SeminormResult gagliardo_restricted(const FieldFn& f, const Exponents& e, const Domain& domain,
                                    const CoverFn& cover, int first_level, int last_level,
                                    const SeminormOptions& opt = {});

/// Divergence flag for a sequence of per-level values: the last three
/// increments are positive, do not decay (ratio >= 0.9) and are not
/// negligible relative to the value. Needs at least four levels.
bool detect_divergence(std::span<const double> values);

struct McResult {
  double estimate = 0.0;  ///< estimate of the p-th power of the seminorm
  double std_error = 0.0;
  bool unstable = false;  ///< a single sample dominates the sum
  std::uint64_t samples = 0;
};

/// Monte Carlo estimate of the p-th power of the full or restricted
/// seminorm. x is uniform in the domain, the direction uniform, and r has
/// density proportional to r^(p - sp - 1). Deterministic given the seed and
/// independent of the thread count.
McResult mc_oracle(const FieldFn& f, const Exponents& e, const Domain& domain, bool restricted,
                   std::uint64_t n_samples, std::uint64_t seed, int threads = 0);

}  // namespace fracinterp
