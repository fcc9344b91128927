#include "fracinterp/kfunctional.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "fracinterp/errors.hpp"
#include "fracinterp/parallel.hpp"
#include "fracinterp/quadrature.hpp"

namespace fracinterp {

using SpMat = Eigen::SparseMatrix<double>;

struct FeSpace::Impl {
  std::shared_ptr<const PartitionOfUnity> basis;
  std::vector<Triangle2> cells;
  std::vector<double> areas;
  std::vector<std::array<Point2, 3>> gradients;
  SpMat pattern;
  std::vector<std::array<int, 9>> slots;  ///< value index of entry (i, j) per triangle
  SpMat mass;
  SpMat stiffness;

  [[nodiscard]] const Mesh& mesh() const { return basis->mesh(); }

  /// Zero matrix with the FE sparsity pattern.
  [[nodiscard]] SpMat blank() const {
    SpMat m = pattern;
    std::fill(m.valuePtr(), m.valuePtr() + m.nonZeros(), 0.0);
    return m;
  }
};

FeSpace::FeSpace(Mesh mesh) : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.basis = std::make_shared<const PartitionOfUnity>(PartitionOfUnity::lagrange(std::move(mesh)));
  const Mesh& m = im.mesh();
  const auto n = static_cast<Eigen::Index>(m.vertices.size());
  const std::size_t nt = m.triangles.size();
  im.cells.reserve(nt);
  im.areas.reserve(nt);
  im.gradients.reserve(nt);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const Triangle2 tri = m.triangle(t);
    im.cells.push_back(tri);
    im.areas.push_back(tri.area());
    im.gradients.push_back(tri.barycentric_gradients());
    for (int i : m.triangles[t])
      for (int j : m.triangles[t]) trip.emplace_back(i, j, 1.0);
  }
  im.pattern.resize(n, n);
  im.pattern.setFromTriplets(trip.begin(), trip.end());
  im.pattern.makeCompressed();

  im.slots.resize(nt);
  const int* outer = im.pattern.outerIndexPtr();
  const int* inner = im.pattern.innerIndexPtr();
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& v = m.triangles[t];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int col = v[b];
        const int* first = inner + outer[col];
        const int* last = inner + outer[col + 1];
        const int* it = std::lower_bound(first, last, v[a]);
        im.slots[t][3 * a + b] = static_cast<int>(it - inner);
      }
  }

  im.mass = im.blank();
  im.stiffness = im.blank();
  double* mv = im.mass.valuePtr();
  double* sv = im.stiffness.valuePtr();
  for (std::size_t t = 0; t < nt; ++t) {
    const double area = im.areas[t];
    const auto& g = im.gradients[t];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int s = im.slots[t][3 * a + b];
        mv[s] += area / 12.0 * (a == b ? 2.0 : 1.0);
        sv[s] += area * dot(g[a], g[b]);
      }
  }
}

FeSpace::~FeSpace() = default;

const Mesh& FeSpace::mesh() const { return impl_->mesh(); }
std::span<const Triangle2> FeSpace::cells() const { return impl_->cells; }
const std::shared_ptr<const PartitionOfUnity>& FeSpace::basis() const { return impl_->basis; }
std::size_t FeSpace::dimension() const { return impl_->mesh().vertices.size(); }

namespace {

/// Per-triangle contributions summed in a fixed tree order.
template <class Fn>
double sum_triangles(std::size_t n, int threads, Fn&& fn) {
  std::vector<double> parts(n);
  parallel_for(n, [&](std::size_t t) { parts[t] = fn(t); }, threads);
  return pairwise_sum(parts);
}

/// Quadrature points of the subdivided degree-4 rule on every FE triangle,
/// stored triangle by triangle (`per` points each).
struct QuadSet {
  int per = 0;
  std::vector<double> weight;
  std::vector<std::array<double, 3>> phi;
  std::vector<double> f;
};

QuadSet make_quadrature(const FeSpace::Impl& im, const FieldFn& f, int subdivision, int threads) {
  const auto rule = triangle_rule_degree4();
  QuadSet q;
  q.per = static_cast<int>(rule.size()) << (2 * subdivision);
  const std::size_t nt = im.cells.size();
  const std::size_t total = nt * static_cast<std::size_t>(q.per);
  q.weight.resize(total);
  q.phi.resize(total);
  q.f.resize(total);
  parallel_for(nt, [&](std::size_t t) {
    std::size_t k = t * static_cast<std::size_t>(q.per);
    const Triangle2& parent = im.cells[t];
    for (const auto& child : subdivide(parent, subdivision)) {
      const double area = child.area();
      for (const auto& r : rule) {
        const Point2 x = child.at(r.bary[0], r.bary[1], r.bary[2]);
        q.weight[k] = area * r.weight;
        q.phi[k] = parent.barycentric(x);
        q.f[k] = f(x);
        ++k;
      }
    }
  }, threads);
  return q;
}

struct Powers {
  double residual = 0.0;  ///< sum w |f - h|^p
  double value = 0.0;     ///< sum w |h|^p
  double gradient = 0.0;  ///< sum area |grad h|^p
};

Point2 triangle_gradient(const FeSpace::Impl& im, std::size_t t, const Eigen::VectorXd& c) {
  const auto& v = im.mesh().triangles[t];
  const auto& g = im.gradients[t];
  return g[0] * c[v[0]] + g[1] * c[v[1]] + g[2] * c[v[2]];
}

double local_value(const FeSpace::Impl& im, const QuadSet& q, std::size_t t, std::size_t k,
                   const Eigen::VectorXd& c) {
  const auto& v = im.mesh().triangles[t];
  return q.phi[k][0] * c[v[0]] + q.phi[k][1] * c[v[1]] + q.phi[k][2] * c[v[2]];
}

/// Exact p-th powers (eps = 0) or smoothed ones: sum (u^2 + eps^2)^(p/2).
Powers powers(const FeSpace::Impl& im, const QuadSet& q, const Eigen::VectorXd& c, double p,
              double eps_v, double eps_g, int threads) {
  const std::size_t nt = im.cells.size();
  auto phi_p = [p](double u, double eps) {
    return eps == 0.0 ? std::pow(std::abs(u), p) : std::pow(u * u + eps * eps, 0.5 * p);
  };
  Powers out;
  out.residual = sum_triangles(nt, threads, [&](std::size_t t) {
    double acc = 0.0;
    for (int j = 0; j < q.per; ++j) {
      const std::size_t k = t * q.per + j;
      acc += q.weight[k] * phi_p(q.f[k] - local_value(im, q, t, k, c), eps_v);
    }
    return acc;
  });
  out.value = sum_triangles(nt, threads, [&](std::size_t t) {
    double acc = 0.0;
    for (int j = 0; j < q.per; ++j) {
      const std::size_t k = t * q.per + j;
      acc += q.weight[k] * phi_p(local_value(im, q, t, k, c), eps_v);
    }
    return acc;
  });
  out.gradient = sum_triangles(nt, threads, [&](std::size_t t) {
    return im.areas[t] * phi_p(norm(triangle_gradient(im, t, c)), eps_g);
  });
  return out;
}

Eigen::VectorXd solve_spd(const SpMat& a, const Eigen::VectorXd& b, const char* what) {
  Eigen::SimplicialLDLT<SpMat> solver;
  solver.compute(a);
  if (solver.info() != Eigen::Success)
    throw NumericError(std::string(what) + ": system matrix is singular or indefinite");
  Eigen::VectorXd x = solver.solve(b);
  if (solver.info() != Eigen::Success || !x.allFinite())
    throw NumericError(std::string(what) + ": linear solve produced non-finite values");
  return x;
}

Eigen::VectorXd load_vector(const FeSpace::Impl& im, const QuadSet& q, const std::vector<double>* w) {
  const auto& tris = im.mesh().triangles;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(im.mesh().vertices.size()));
  for (std::size_t t = 0; t < tris.size(); ++t)
    for (int j = 0; j < q.per; ++j) {
      const std::size_t k = t * q.per + j;
      const double wf = q.weight[k] * q.f[k] * (w ? (*w)[k] : 1.0);
      for (int a = 0; a < 3; ++a) b[tris[t][a]] += wf * q.phi[k][a];
    }
  return b;
}

struct Candidate {
  std::string name;
  double g_norm = 0.0;
  double h_norm = 0.0;
};

double cost(const Candidate& c, double ell) { return c.g_norm + ell * c.h_norm; }

Candidate fe_candidate(std::string name, const Powers& pw, double p) {
  return {std::move(name), std::pow(pw.residual, 1.0 / p), std::pow(pw.value + pw.gradient, 1.0 / p)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Decomposition k_upper_opt(const FieldFn& f, double ell, const FeSpace& space, double p,
                          const KOptions& opt) {
  if (!(ell > 0.0) || !std::isfinite(ell)) throw ValidationError("k_upper_opt: ell must be positive");
  if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("k_upper_opt: p must lie in (1, inf)");
  const auto& im = space.impl();
  const int threads = opt.threads;
  const QuadSet q = make_quadrature(im, f, opt.norm_subdivision, threads);
  const double lp = std::pow(ell, p);

  Decomposition d;
  d.ell = ell;

  // Surrogate minimizer; p = 2 is a single solve and seeds IRLS otherwise.
  const Eigen::VectorXd b = load_vector(im, q, nullptr);
  const SpMat a2 = im.mass + (ell * ell) * (im.mass + im.stiffness);
  Eigen::VectorXd c = solve_spd(a2, b, "k_upper_opt");
  d.iterations = 1;

  if (p != 2.0) {
    double f_sq = 0.0, area = 0.0;
    for (std::size_t k = 0; k < q.f.size(); ++k) {
      f_sq += q.weight[k] * q.f[k] * q.f[k];
      area += q.weight[k];
    }
    const double f_scale = std::sqrt(f_sq / area);
    const double eps_v = std::max(opt.smoothing * f_scale, std::numeric_limits<double>::min());
    const double eps_g = eps_v / ell;
    auto objective = [&](const Eigen::VectorXd& x) {
      const Powers pw = powers(im, q, x, p, eps_v, eps_g, threads);
      return pw.residual + lp * (pw.value + pw.gradient);
    };

    const auto& tris = im.mesh().triangles;
    const std::size_t nt = tris.size();
    const auto n = static_cast<Eigen::Index>(im.mesh().vertices.size());
    // For a smoothed power phi(u) = (u^2 + eps^2)^(p/2), the functions below
    // return phi'(u)/(p u) and phi''(u)/p.
    auto weight = [p](double u, double eps) { return std::pow(u * u + eps * eps, 0.5 * (p - 2.0)); };
    auto curvature = [p](double u, double eps) {
      const double s = u * u + eps * eps;
      return std::pow(s, 0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * u * u / s);
    };
    std::vector<double> wr(q.f.size());
    double phi = objective(c);
    double rel = std::numeric_limits<double>::infinity();
    d.converged = false;
    for (int it = 1; it <= opt.irls_max_iterations; ++it) {
      d.iterations = it + 1;
      // Newton system H dc = -grad and the IRLS system A target = b share
      // the sparsity pattern; both are assembled in one sweep.
      SpMat hess = im.blank();
      SpMat a = im.blank();
      double* hv = hess.valuePtr();
      double* av = a.valuePtr();
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
      for (std::size_t t = 0; t < nt; ++t) {
        const auto& v = tris[t];
        const auto& g = im.gradients[t];
        std::array<double, 9> hl{}, al{};
        for (int j = 0; j < q.per; ++j) {
          const std::size_t k = t * q.per + j;
          const double h = local_value(im, q, t, k, c);
          const double r = q.f[k] - h;
          wr[k] = weight(r, eps_v);
          const double wh = lp * weight(h, eps_v);
          const double cv = q.weight[k] * (curvature(r, eps_v) + lp * curvature(h, eps_v));
          const double dv = q.weight[k] * (wh * h - wr[k] * r);
          for (int x = 0; x < 3; ++x) {
            grad[v[x]] += dv * q.phi[k][x];
            for (int y = 0; y < 3; ++y) {
              const double pp = q.phi[k][x] * q.phi[k][y];
              hl[3 * x + y] += cv * pp;
              al[3 * x + y] += q.weight[k] * (wr[k] + wh) * pp;
            }
          }
        }
        const Point2 gh = triangle_gradient(im, t, c);
        const double gs = dot(gh, gh) + eps_g * eps_g;
        const double wg = lp * im.areas[t] * weight(norm(gh), eps_g);
        for (int x = 0; x < 3; ++x) {
          grad[v[x]] += wg * dot(gh, g[x]);
          for (int y = 0; y < 3; ++y) {
            const double gg = dot(g[x], g[y]);
            hl[3 * x + y] += wg * (gg + (p - 2.0) * dot(gh, g[x]) * dot(gh, g[y]) / gs);
            al[3 * x + y] += wg * gg;
            hv[im.slots[t][3 * x + y]] += hl[3 * x + y];
            av[im.slots[t][3 * x + y]] += al[3 * x + y];
          }
        }
      }

      // For p < 2 the reweighting step majorizes the objective and is used
      // directly. For p > 2 it converges slowly, so a damped Newton step with
      // an Armijo condition is taken instead, falling back to the
      // reweighting step if the Newton direction is not a descent direction.
      // Gradient and Hessian above omit the common factor p.
      double slope = 0.0;
      Eigen::VectorXd dir;
      if (p > 2.0) {
        dir = solve_spd(hess, -grad, "k_upper_opt (Newton)");
        slope = p * grad.dot(dir);
      }
      if (!(slope < 0.0)) {
        slope = 0.0;
        dir = solve_spd(a, load_vector(im, q, &wr), "k_upper_opt (IRLS)") - c;
      }
      double step = 1.0;
      bool accepted = false;
      Eigen::VectorXd trial;
      double phi_trial = phi;
      for (int k = 0; k < 40; ++k) {
        trial = c + step * dir;
        phi_trial = objective(trial);
        if (phi_trial <= phi + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!std::isfinite(phi_trial))
        throw NumericError("k_upper_opt: IRLS objective became non-finite at iteration " + std::to_string(it));
      if (!accepted) {
        // No descent direction is left at working precision.
        d.converged = true;
        rel = 0.0;
        break;
      }
      rel = phi > 0.0 ? (phi - phi_trial) / phi : 0.0;
      c = trial;
      phi = phi_trial;
      if (rel < opt.irls_tolerance) {
        d.converged = true;
        break;
      }
    }
    if (!d.converged)
      throw NumericError("k_upper_opt: IRLS did not converge in " + std::to_string(opt.irls_max_iterations) +
                         " iterations (ell=" + fmt(ell) + ", p=" + fmt(p) + ", objective=" + fmt(phi) +
                         ", last relative change=" + fmt(rel) + ")");
  }

  const Powers surrogate = powers(im, q, c, p, 0.0, 0.0, threads);
  std::vector<Candidate> cands;
  cands.push_back(fe_candidate("surrogate", surrogate, p));
  d.surrogate_value = cost(cands.back(), ell);
  d.coefficients.assign(c.data(), c.data() + c.size());

  cands.push_back({"zero", lp_norm(f, space.cells(), p, opt.norm_subdivision), 0.0});
  if (f.in_w1p(p).value_or(false))
    cands.push_back({"identity", 0.0, w1p_norm(f, space.cells(), p, opt.norm_subdivision).norm});
  const std::vector<double> nodal = nodal_interpolant(f, im.mesh());
  const Eigen::VectorXd ci = Eigen::Map<const Eigen::VectorXd>(nodal.data(), static_cast<Eigen::Index>(nodal.size()));
  cands.push_back(fe_candidate("interpolant", powers(im, q, ci, p, 0.0, 0.0, threads), p));

  std::size_t best = 0;
  for (std::size_t k = 1; k < cands.size(); ++k)
    if (cost(cands[k], ell) < cost(cands[best], ell)) best = k;
  const Candidate& w = cands[best];
  d.candidate = w.name;
  d.g_norm = w.g_norm;
  d.h_norm = w.h_norm;
  d.value = cost(w, ell);
  if (w.name == "surrogate")
    d.h = FieldFn::discrete(space.basis(), d.coefficients);
  else if (w.name == "interpolant")
    d.h = FieldFn::discrete(space.basis(), nodal);
  else if (w.name == "identity")
    d.h = f;
  else
    d.h = FieldFn::constant(0.0);
  d.g = f.minus(d.h);
  if (!std::isfinite(d.value)) throw NumericError("k_upper_opt: non-finite decomposition value");
  return d;
}

Decomposition k_upper_opt(const FieldFn& f, double ell, const Mesh& mesh, double p, const KOptions& opt) {
  const FeSpace space(mesh);
  return k_upper_opt(f, ell, space, p, opt);
}

double ball_average(const FieldFn& f, Point2 center, double radius) {
  constexpr int kAngles = 16;
  const GaussRule& g = gauss_legendre(8);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const double u = g.nodes[i];
    const double r = u * radius;
    const double w = g.weights[i] * r * std::exp(1.0 - 1.0 / (1.0 - u * u));
    for (int k = 0; k < kAngles; ++k) {
      const double th = 2.0 * std::numbers::pi * (k + 0.5) / kAngles;
      num += w * f(Point2{center.x + r * std::cos(th), center.y + r * std::sin(th)});
      den += w;
    }
  }
  return num / den;
}

Decomposition k_upper_constructive(const FieldFn& f, double ell,
                                   const std::shared_ptr<const PartitionOfUnity>& pu, double p,
                                   const KOptions& opt) {
  if (!pu) throw ValidationError("k_upper_constructive: missing partition of unity");
  if (!(ell > 0.0)) throw ValidationError("k_upper_constructive: ell must be positive");
  if (!(p >= 1.0)) throw ValidationError("k_upper_constructive: p must be >= 1");
  const std::size_t n = pu->size();
  std::vector<double> coeffs(n);
  parallel_for(n, [&](std::size_t j) {
    const Point2 x = pu->john_center(j);
    const double rho = pu->john_radius(j);
    if (!(rho > 0.0) || pu->locate(x) < 0)
      throw std::logic_error("k_upper_constructive: averaging ball of patch " + std::to_string(j) +
                             " is not inside its patch");
    coeffs[j] = ball_average(f, x, 0.5 * rho);
  }, opt.threads);

  const auto rule = triangle_rule_degree4();
  const auto cells = pu->cells();
  std::vector<std::array<double, 3>> parts(cells.size());
  parallel_for(cells.size(), [&](std::size_t c) {
    std::array<double, 3> acc{};
    std::array<PuEntry, 3> e;
    for (const auto& child : subdivide(cells[c].triangle, opt.norm_subdivision)) {
      const double area = child.area();
      for (const auto& r : rule) {
        const Point2 x = child.at(r.bary[0], r.bary[1], r.bary[2]);
        const int m = pu->eval(c, x, e);
        double h = 0.0;
        Point2 gh{};
        for (int k = 0; k < m; ++k) {
          h += coeffs[e[k].index] * e[k].value;
          gh = gh + e[k].gradient * coeffs[e[k].index];
        }
        const double w = area * r.weight;
        acc[0] += w * std::pow(std::abs(f(x) - h), p);
        acc[1] += w * std::pow(std::abs(h), p);
        acc[2] += w * std::pow(norm(gh), p);
      }
    }
    parts[c] = acc;
  }, opt.threads);
  std::array<std::vector<double>, 3> cols;
  for (auto& col : cols) col.reserve(parts.size());
  for (const auto& a : parts)
    for (int k = 0; k < 3; ++k) cols[k].push_back(a[k]);

  Decomposition d;
  d.ell = ell;
  d.candidate = "constructive";
  d.g_norm = std::pow(pairwise_sum(cols[0]), 1.0 / p);
  d.h_norm = std::pow(pairwise_sum(cols[1]) + pairwise_sum(cols[2]), 1.0 / p);
  d.value = d.g_norm + ell * d.h_norm;
  d.surrogate_value = std::numeric_limits<double>::quiet_NaN();
  d.coefficients = coeffs;
  d.h = FieldFn::discrete(pu, std::move(coeffs));
  d.g = f.minus(d.h);
  if (!std::isfinite(d.value)) throw NumericError("k_upper_constructive: non-finite decomposition value");
  return d;
}

// --- scale grids and profiles -------------------------------------------------------

std::vector<double> ScaleGrid::scales() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) out.push_back(tau * std::pow(ratio, k));
  return out;
}

void ScaleGrid::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("scale grid: tau must be positive");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("scale grid: ratio must lie in (0,1)");
  if (count < 4) throw ValidationError("scale grid: count must be at least 4");
}

ScaleGrid default_grid(const DomainModel& model, int count) {
  ScaleGrid g;
  g.tau = std::min(0.25, model.domain().diameter() / 8.0);
  g.ratio = 0.5;
  g.count = count;
  const double floor = model.min_partition_scale();
  while (g.count > 4 && g.tau * std::pow(g.ratio, g.count - 1) < floor) --g.count;
  return g;
}

double interp_from_k(std::span<const double> scales, std::span<const double> k, const Exponents& e,
                     double ratio, double tail_bound) {
  std::vector<double> terms;
  terms.reserve(scales.size());
  for (std::size_t i = 0; i < scales.size(); ++i)
    terms.push_back(std::pow(std::pow(scales[i], -e.s) * k[i], e.p));
  return std::pow(pairwise_sum(terms) * std::log(1.0 / ratio) + tail_bound, 1.0 / e.p);
}

std::shared_ptr<const FeSpace> cached_fe_space(const DomainModel& model, double h) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const FeSpace>> cache;
  static std::vector<std::string> order;
  char key_buf[64];
  std::snprintf(key_buf, sizeof key_buf, "@%a", h);
  const std::string key = model.id() + key_buf;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto space = std::make_shared<const FeSpace>(model.fe_mesh(h));
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  if (order.size() >= 8) {
    cache.erase(order.front());
    order.erase(order.begin());
  }
  cache.emplace(key, space);
  order.push_back(key);
  return space;
}

namespace {

[[noreturn]] void rethrow_with_scale(std::size_t k, double ell) {
  const std::string prefix = "scale " + std::to_string(k) + " (ell=" + fmt(ell) + "): ";
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  }
}

/// Slopes of a piecewise-linear interpolant over decreasing scales must not
/// increase by more than `tol` (relative) as the scale grows.
bool concave_within(std::span<const double> scales, std::span<const double> k, double tol) {
  for (std::size_t i = 0; i + 2 < scales.size(); ++i) {
    const double outer = (k[i] - k[i + 1]) / (scales[i] - scales[i + 1]);
    const double inner = (k[i + 1] - k[i + 2]) / (scales[i + 1] - scales[i + 2]);
    if (outer > inner * (1.0 + tol) + 1e-14 * std::max(1.0, std::abs(inner))) return false;
  }
  return true;
}

bool nondecreasing(std::span<const double> k) {
  for (std::size_t i = 0; i + 1 < k.size(); ++i)
    if (k[i + 1] > k[i]) return false;  // scales decrease along the grid
  return true;
}

}  // namespace

KProfile interp_seminorm(const FieldFn& f, const Exponents& e, const ScaleGrid& grid,
                         const DomainModel& model, KMethod method, const KOptions& opt) {
  e.validate();
  grid.validate();
  if (!(e.p > 1.0)) throw ValidationError("interp_seminorm: p must lie in (1, inf)");
  KProfile prof;
  prof.exponents = e;
  prof.grid = grid;
  prof.method = method;
  prof.scales = grid.scales();
  const std::size_t n = prof.scales.size();

  const double area = model.domain().area();
  const double h_floor = std::sqrt(2.0 * area / static_cast<double>(opt.max_fe_triangles));
  std::vector<std::shared_ptr<const FeSpace>> spaces(n);
  prof.fe_scale.resize(n);
  prof.under_resolved.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double want = prof.scales[k] / opt.fe_refinement;
    const double h = std::max(want, h_floor);
    try {
      spaces[k] = cached_fe_space(model, h);
    } catch (...) {
      rethrow_with_scale(k, prof.scales[k]);
    }
    prof.fe_scale[k] = spaces[k]->mesh().target_scale;
    prof.under_resolved[k] = prof.fe_scale[k] > want * (1.0 + 1e-9);
  }

  const auto ref_cells = spaces.back()->cells();
  prof.f_lp = lp_norm(f, ref_cells, e.p, opt.norm_subdivision);
  prof.f_in_w1p = f.in_w1p(e.p).value_or(false);
  prof.f_w1p = prof.f_in_w1p ? w1p_norm(f, ref_cells, e.p, opt.norm_subdivision).norm
                             : std::numeric_limits<double>::infinity();

  std::vector<Decomposition> opt_d(n), cons_d(n);
  KOptions inner = opt;
  inner.threads = 1;
  parallel_for(n, [&](std::size_t k) {
    const double ell = prof.scales[k];
    try {
      opt_d[k] = k_upper_opt(f, ell, *spaces[k], e.p, inner);
      auto pu = std::make_shared<const PartitionOfUnity>(model.partition(ell));
      cons_d[k] = k_upper_constructive(f, ell, pu, e.p, inner);
    } catch (const std::logic_error&) {
      throw;
    } catch (...) {
      rethrow_with_scale(k, ell);
    }
  }, opt.threads);

  // Every decomposition found bounds K at every scale, so the estimate is
  // the lower envelope of the affine functions a + ell b.
  std::vector<std::pair<double, double>> all{{prof.f_lp, 0.0}}, cons;
  if (prof.f_in_w1p) all.emplace_back(0.0, prof.f_w1p);
  for (std::size_t k = 0; k < n; ++k) {
    all.emplace_back(opt_d[k].g_norm, opt_d[k].h_norm);
    cons.emplace_back(cons_d[k].g_norm, cons_d[k].h_norm);
  }
  all.insert(all.end(), cons.begin(), cons.end());
  auto envelope = [](const std::vector<std::pair<double, double>>& c, double ell) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : c) best = std::min(best, a + ell * b);
    return best;
  };
  for (std::size_t k = 0; k < n; ++k) {
    const double ell = prof.scales[k];
    prof.k_opt.push_back(envelope(all, ell));
    prof.k_constructive.push_back(envelope(cons, ell));
    prof.k_opt_direct.push_back(opt_d[k].value);
    prof.k_constructive_direct.push_back(cons_d[k].value);
    prof.irls_iterations.push_back(opt_d[k].iterations);
    if (prof.k_opt.back() > 0.0)
      prof.max_constructive_ratio =
          std::max(prof.max_constructive_ratio, prof.k_constructive.back() / prof.k_opt.back());
  }

  prof.monotone = nondecreasing(prof.k_opt) && nondecreasing(prof.k_constructive);
  prof.concave = concave_within(prof.scales, prof.k_opt, 0.05) &&
                 concave_within(prof.scales, prof.k_constructive, 0.05);

  return with_smoothness(prof, e.s);
}

KProfile with_smoothness(KProfile prof, double s) {
  Exponents& e = prof.exponents;
  e.s = s;
  e.validate();
  const double sp = e.s * e.p;
  prof.tail_bound = std::pow(prof.f_lp, e.p) * std::pow(prof.grid.tau, -sp) / sp;
  prof.head_bounded = prof.f_in_w1p && std::isfinite(prof.f_w1p);
  const double q = (1.0 - e.s) * e.p;
  prof.head_gap = prof.head_bounded ? std::pow(prof.f_w1p, e.p) * std::pow(prof.scales.back(), q) / q
                                    : std::numeric_limits<double>::infinity();
  prof.surrogate_factor = std::pow(2.0, 1.0 - 1.0 / e.p);
  prof.interp_opt = interp_from_k(prof.scales, prof.k_opt, e, prof.grid.ratio, prof.tail_bound);
  prof.interp_constructive = interp_from_k(prof.scales, prof.k_constructive, e, prof.grid.ratio, prof.tail_bound);
  prof.interp_value = prof.method == KMethod::opt ? prof.interp_opt : prof.interp_constructive;
  return prof;
}

nlohmann::json kprofile_to_json(const KProfile& prof) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  nlohmann::json j;
  j["s"] = prof.exponents.s;
  j["p"] = prof.exponents.p;
  j["method"] = prof.method == KMethod::opt ? "opt" : "constructive";
  j["grid"] = {{"tau", prof.grid.tau}, {"ratio", prof.grid.ratio}, {"count", prof.grid.count}};
  j["scales"] = prof.scales;
  j["k_opt"] = prof.k_opt;
  j["k_constructive"] = prof.k_constructive;
  j["k_opt_direct"] = prof.k_opt_direct;
  j["k_constructive_direct"] = prof.k_constructive_direct;
  j["fe_scale"] = prof.fe_scale;
  j["under_resolved"] = prof.under_resolved;
  j["irls_iterations"] = prof.irls_iterations;
  j["f_lp"] = prof.f_lp;
  j["f_w1p"] = finite_or_null(prof.f_w1p);
  j["interp_value"] = prof.interp_value;
  j["interp_opt"] = prof.interp_opt;
  j["interp_constructive"] = prof.interp_constructive;
  j["tail_bound"] = prof.tail_bound;
  j["head_gap"] = finite_or_null(prof.head_gap);
  j["head_bounded"] = prof.head_bounded;
  j["surrogate_factor"] = prof.surrogate_factor;
  j["max_constructive_ratio"] = prof.max_constructive_ratio;
  j["monotone"] = prof.monotone;
  j["concave"] = prof.concave;
  return j;
}

std::string kprofile_to_csv(const KProfile& prof) {
  std::ostringstream os;
  os.precision(17);
  os << "scale,k_opt,k_constructive,k_opt_direct,k_constructive_direct,scaled_k_opt,fe_scale,"
        "under_resolved,irls_iterations\n";
  for (std::size_t k = 0; k < prof.scales.size(); ++k) {
    os << prof.scales[k] << ',' << prof.k_opt[k] << ',' << prof.k_constructive[k] << ','
       << prof.k_opt_direct[k] << ',' << prof.k_constructive_direct[k] << ','
       << std::pow(prof.scales[k], -prof.exponents.s) * prof.k_opt[k] << ',' << prof.fe_scale[k] << ','
       << (prof.under_resolved[k] ? 1 : 0) << ',' << prof.irls_iterations[k] << '\n';
  }
  return os.str();
}

}  // namespace fracinterp
