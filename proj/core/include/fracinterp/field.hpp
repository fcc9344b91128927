#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fracinterp/geometry.hpp"

namespace fracinterp {

class PartitionOfUnity;
struct Mesh;

struct FieldValue {
  double value = 0.0;
  Point2 gradient{};
};

namespace detail {
struct FieldImpl;
}

/// Scalar function on a planar domain with an a.e. gradient. Cheap to copy;
/// copies share one immutable implementation.
///
/// Text ids (see parse):
///   const c | linear a b c | slit_angle | bump cx cy R | hat cx cy w |
///   expr <expression in x, y, r, theta>
class FieldFn {
 public:
  FieldFn();  // the zero constant

  static FieldFn constant(double c);
  /// a*x + b*y + c
  static FieldFn linear(double a, double b, double c);
  /// Smooth transition in the angle around the origin with the branch cut
  /// along the positive x axis: 1 for theta <= pi/2, 0 for theta >= 3pi/2.
  static FieldFn slit_angle();
  /// exp(1 - 1/(1 - rho^2)) for rho = |x - c|/R < 1, else 0.
  static FieldFn bump(Point2 center, double radius);
  /// Piecewise-linear pyramid 1 - max(|u|, |v|, |u - v|) with
  /// (u, v) = (x - c)/w, clamped at 0.
  static FieldFn hat(Point2 center, double width);
  /// Arithmetic expression; throws ValidationError on syntax errors.
  static FieldFn expression(const std::string& text);
  /// sum_k coeffs[k] psi_k for a partition of unity.
  static FieldFn discrete(std::shared_ptr<const PartitionOfUnity> pu, std::vector<double> coeffs);
  static FieldFn parse(const std::string& id);

  [[nodiscard]] FieldFn scaled(double c) const;
  /// x -> f(x - shift)
  [[nodiscard]] FieldFn translated(Point2 shift) const;
  /// x -> f(x) - g(x)
  [[nodiscard]] FieldFn minus(const FieldFn& g) const;

  [[nodiscard]] double operator()(Point2 x) const;
  [[nodiscard]] FieldValue eval(Point2 x) const;
  [[nodiscard]] const std::string& id() const;
  [[nodiscard]] bool is_constant() const;
  /// Known membership in W^{1,p}; nullopt when not decidable from the form.
  [[nodiscard]] std::optional<bool> in_w1p(double p) const;

 private:
  explicit FieldFn(std::shared_ptr<const detail::FieldImpl> impl);
  std::shared_ptr<const detail::FieldImpl> impl_;
};

/// Nodal values of f on a mesh. Evaluation points of vertices tagged with a
/// slit side are moved 1e-9 * scale toward their side, so jumping functions
/// take the one-sided limit.
std::vector<double> nodal_interpolant(const FieldFn& f, const Mesh& mesh);

}  // namespace fracinterp
