#pragma once

// Dense P1 finite-element assembly and Cholesky solve, written independently
// of the library's sparse path so that it can serve as a reference.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fracinterp/mesh.hpp"

namespace oracle {

struct Dense {
  std::size_t n = 0;
  std::vector<double> a;  // row major
  explicit Dense(std::size_t size) : n(size), a(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

struct P1System {
  Dense mass;
  Dense stiffness;
};

inline P1System assemble(const fracinterp::Mesh& m) {
  const std::size_t n = m.vertices.size();
  P1System sys{Dense(n), Dense(n)};
  for (const auto& t : m.triangles) {
    const auto p0 = m.vertices[t[0]], p1 = m.vertices[t[1]], p2 = m.vertices[t[2]];
    const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    const double area = 0.5 * std::abs(det);
    // Gradients of the barycentric coordinates: (y_{k+1} - y_{k+2}, x_{k+2} - x_{k+1}) / det.
    const double gx[3] = {(p1.y - p2.y) / det, (p2.y - p0.y) / det, (p0.y - p1.y) / det};
    const double gy[3] = {(p2.x - p1.x) / det, (p0.x - p2.x) / det, (p1.x - p0.x) / det};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        sys.mass(t[i], t[j]) += area * (i == j ? 2.0 : 1.0) / 12.0;
        sys.stiffness(t[i], t[j]) += area * (gx[i] * gx[j] + gy[i] * gy[j]);
      }
  }
  return sys;
}

inline std::vector<double> multiply(const Dense& a, const std::vector<double>& x) {
  std::vector<double> y(a.n, 0.0);
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < a.n; ++j) y[i] += a(i, j) * x[j];
  return y;
}

inline double quadratic(const Dense& a, const std::vector<double>& x) {
  const auto y = multiply(a, x);
  double s = 0.0;
  for (std::size_t i = 0; i < a.n; ++i) s += x[i] * y[i];
  return s;
}

// Solves a x = b for symmetric positive definite a.
inline std::vector<double> cholesky_solve(Dense a, std::vector<double> b) {
  const std::size_t n = a.n;
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw std::runtime_error("oracle: matrix not positive definite");
    a(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / a(j, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= a(i, k) * b[k];
    b[i] /= a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= a(k, i) * b[k];
    b[i] /= a(i, i);
  }
  return b;
}

struct P2Minimizer {
  std::vector<double> coefficients;
  double value = 0.0;  // ||f - h||_2 + ell ||h||_{W^{1,2}}
};

// Minimizer of ||f - h||^2 + ell^2 (||h||^2 + ||grad h||^2) over P1 functions
// for f given by nodal values (f itself piecewise linear on the mesh).
inline P2Minimizer p2_minimizer(const fracinterp::Mesh& m, const std::vector<double>& f_nodal,
                                double ell) {
  const P1System sys = assemble(m);
  Dense a(sys.mass.n);
  for (std::size_t k = 0; k < a.a.size(); ++k)
    a.a[k] = sys.mass.a[k] + ell * ell * (sys.mass.a[k] + sys.stiffness.a[k]);
  P2Minimizer out;
  out.coefficients = cholesky_solve(a, multiply(sys.mass, f_nodal));
  std::vector<double> diff(f_nodal.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f_nodal[i] - out.coefficients[i];
  Dense w(sys.mass.n);
  for (std::size_t k = 0; k < w.a.size(); ++k) w.a[k] = sys.mass.a[k] + sys.stiffness.a[k];
  out.value = std::sqrt(quadratic(sys.mass, diff)) + ell * std::sqrt(quadratic(w, out.coefficients));
  return out;
}

}  // namespace oracle
