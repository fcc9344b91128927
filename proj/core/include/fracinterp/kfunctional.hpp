#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fracinterp/field.hpp"
#include "fracinterp/mesh.hpp"
#include "fracinterp/model.hpp"
#include "fracinterp/partition.hpp"
#include "fracinterp/seminorms.hpp"

namespace fracinterp {

/// Continuous piecewise-linear functions on a mesh with assembled mass and
/// stiffness matrices. Immutable after construction and safe to share.
class FeSpace {
 public:
  explicit FeSpace(Mesh mesh);
  ~FeSpace();
  FeSpace(const FeSpace&) = delete;
  FeSpace& operator=(const FeSpace&) = delete;

  [[nodiscard]] const Mesh& mesh() const;
  [[nodiscard]] std::span<const Triangle2> cells() const;
  [[nodiscard]] const std::shared_ptr<const PartitionOfUnity>& basis() const;
  [[nodiscard]] std::size_t dimension() const;

  struct Impl;
  [[nodiscard]] const Impl& impl() const { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

/// A splitting f = g + h with its cost ||g||_p + ell ||h||_{W^{1,p}}.
struct Decomposition {
  FieldFn h;
  FieldFn g;
  double ell = 0.0;
  double value = 0.0;
  double g_norm = 0.0;  ///< ||g||_p
  double h_norm = 0.0;  ///< ||h||_{W^{1,p}}
  /// Which candidate won: surrogate, zero (h = 0), identity (h = f),
  /// interpolant (h = nodal interpolant) or constructive.
  std::string candidate;
  /// Cost of the surrogate minimizer itself (NaN for constructive).
  double surrogate_value = 0.0;
  std::vector<double> coefficients;  ///< nodal values of the surrogate minimizer
  int iterations = 0;
  bool converged = true;
};

struct KOptions {
  int norm_subdivision = 1;        ///< splits of each cell for the L^p quadrature
  double irls_tolerance = 1e-8;    ///< relative objective change
  int irls_max_iterations = 100;
  double smoothing = 1e-6;         ///< epsilon relative to the size of f
  double fe_refinement = 2.0;      ///< FE element size is ell / fe_refinement
  std::size_t max_fe_triangles = 1u << 15;
  int threads = 0;
};

/// Minimizes ||f-h||_p^p + ell^p (||h||_p^p + ||grad h||_p^p) over the FE
/// space, then returns the best of the minimizer, (f, 0), (0, f) when f is
/// in W^{1,p}, and (f - I f, I f) for the nodal interpolant I f. Throws
/// NumericError on a singular system or when IRLS does not converge.
Decomposition k_upper_opt(const FieldFn& f, double ell, const FeSpace& space, double p,
                          const KOptions& opt = {});
Decomposition k_upper_opt(const FieldFn& f, double ell, const Mesh& mesh, double p,
                          const KOptions& opt = {});

/// h = sum_j f_j psi_j with f_j the bump-weighted average of f over the ball
/// B(x_j, r_j / 2) around the John center of patch j.
Decomposition k_upper_constructive(const FieldFn& f, double ell,
                                   const std::shared_ptr<const PartitionOfUnity>& pu, double p,
                                   const KOptions& opt = {});

/// Bump-weighted average of f over a disk.
double ball_average(const FieldFn& f, Point2 center, double radius);

struct ScaleGrid {
  double tau = 0.25;
  double ratio = 0.5;
  int count = 6;

  /// tau * ratio^k for k = 0..count-1 (decreasing).
  [[nodiscard]] std::vector<double> scales() const;
  /// Throws ValidationError unless 0 < ratio < 1, tau > 0 and count >= 4.
  void validate() const;
};

/// tau = min(1/4, diam / 8), ratio 1/2, six scales, with the count lowered
/// (not below 4) so that every scale is at least `min_scale`.
ScaleGrid default_grid(const DomainModel& model, int count = 6);

enum class KMethod { opt, constructive };

struct KProfile {
  Exponents exponents;
  ScaleGrid grid;
  KMethod method = KMethod::opt;
  std::vector<double> scales;
  std::vector<double> k_opt;             ///< lower envelope of every decomposition found
  std::vector<double> k_constructive;    ///< lower envelope of constructive decompositions
  std::vector<double> k_opt_direct;      ///< k_upper_opt value at each scale
  std::vector<double> k_constructive_direct;
  std::vector<double> fe_scale;          ///< FE element size used at each scale
  std::vector<bool> under_resolved;      ///< FE size capped by the triangle budget
  std::vector<int> irls_iterations;
  double f_lp = 0.0;
  double f_w1p = 0.0;
  bool f_in_w1p = false;
  double interp_value = 0.0;             ///< for `method`
  double interp_opt = 0.0;
  double interp_constructive = 0.0;
  double tail_bound = 0.0;
  double head_gap = 0.0;                 ///< infinity when f is not known to be in W^{1,p}
  bool head_bounded = false;
  double surrogate_factor = 1.0;
  double max_constructive_ratio = 0.0;   ///< max_k k_constructive / k_opt
  bool monotone = true;
  bool concave = true;
};

/// Discretized interpolation seminorm with the tail bound and head gap.
/// Per-scale failures are rethrown with the scale index.
KProfile interp_seminorm(const FieldFn& f, const Exponents& e, const ScaleGrid& grid,
                         const DomainModel& model, KMethod method = KMethod::opt,
                         const KOptions& opt = {});

/// The same K estimates re-evaluated for another smoothness index; K does
/// not depend on s, so only the seminorm, tail and head change.
KProfile with_smoothness(KProfile profile, double s);

/// ((ell^-s K)^p sum over the grid, times ln(1/ratio), plus tail)^(1/p).
double interp_from_k(std::span<const double> scales, std::span<const double> k, const Exponents& e,
                     double ratio, double tail_bound);

/// FE space for a model at element size h, shared through a small cache.
std::shared_ptr<const FeSpace> cached_fe_space(const DomainModel& model, double h);

nlohmann::json kprofile_to_json(const KProfile& profile);
std::string kprofile_to_csv(const KProfile& profile);

}  // namespace fracinterp
