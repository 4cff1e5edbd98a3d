#pragma once

// Independent test oracles. Nothing here calls the library kernels under test
// except the scalar loss/generator evaluations, which have their own checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "smartcpd/bregman.hpp"
#include "smartcpd/losses.hpp"
#include "smartcpd/tensor.hpp"

namespace oracle {

using smartcpd::Matrix;

/// Minimizer of a unimodal f on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int k = 0; k < iters && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Bregman divergence from the generator's textbook formula.
inline double divergence(const smartcpd::MirrorMap& map, double a, double b) {
  using smartcpd::Generator;
  switch (map.generator) {
    case Generator::quadratic: return 0.5 * (a - b) * (a - b);
    case Generator::neglog: return a / b - std::log(a / b) - 1.0;
    case Generator::entropy: return (a > 0.0 ? a * std::log(a / b) : 0.0) - a + b;
    case Generator::power: {
      const double c = map.exponent;
      return std::pow(a, c) - std::pow(b, c) - c * std::pow(b, c - 1.0) * (a - b);
    }
  }
  return 0.0;
}

/// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(x - theta, 0.0);
  return v;
}

/// Textbook phi'(a).
inline double generator_slope(const smartcpd::MirrorMap& map, double a) {
  using smartcpd::Generator;
  switch (map.generator) {
    case Generator::quadratic: return a;
    case Generator::neglog: return -1.0 / a;
    case Generator::entropy: return std::log(a) + 1.0;
    case Generator::power: return map.exponent * std::pow(a, map.exponent - 1.0);
  }
  return 0.0;
}

/// Per-coordinate minimizer of q(a) = g a + gamma D_phi(a, a_t) by bisection on
/// the increasing derivative q'(a) = g + gamma (phi'(a) - phi'(a_t)). Returns
/// nullopt when the minimizer is not interior: q' >= 0 at the lower end of a
/// positive domain (boundary optimum) or q' <= 0 at the upper end (unbounded).
inline std::optional<double> prox_scalar(const smartcpd::MirrorMap& map, double a_t, double g, double gamma) {
  const double slope_t = generator_slope(map, a_t);
  auto dq = [&](double a) { return g + gamma * (generator_slope(map, a) - slope_t); };
  double lo, hi;
  if (map.generator == smartcpd::Generator::quadratic) {
    const double w = 10.0 * (std::abs(g) / gamma + 1.0) + std::abs(a_t);
    lo = map.constraint == smartcpd::Constraint::unconstrained ? a_t - w : 0.0;
    hi = a_t + w;
    if (map.constraint != smartcpd::Constraint::unconstrained && dq(0.0) >= 0.0) return 0.0;
  } else {
    lo = 1e-10;
    hi = 1e10;
    if (dq(lo) >= 0.0 || dq(hi) <= 0.0) return std::nullopt;
    // Geometric halving first, the range spans many decades.
    while (hi / lo > 4.0) {
      const double mid = std::sqrt(lo * hi);
      (dq(mid) < 0.0 ? lo : hi) = mid;
    }
  }
  for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (dq(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Golden-section minimizer of the same objective, searched in log a for
/// positive domains. Only resolves the minimizer to about 1e-8 relative.
inline double prox_scalar_golden(const smartcpd::MirrorMap& map, double a_t, double g, double gamma) {
  auto q = [&](double a) { return g * a + gamma * divergence(map, a, a_t); };
  if (map.generator == smartcpd::Generator::quadratic) {
    const double w = 10.0 * (std::abs(g) / gamma + 1.0) + std::abs(a_t);
    const double lo = map.constraint == smartcpd::Constraint::unconstrained ? a_t - w : 0.0;
    return golden_section(q, lo, a_t + w);
  }
  return std::exp(golden_section([&](double s) { return q(std::exp(s)); }, std::log(1e-10), std::log(1e10)));
}

/// Projected gradient with backtracking for one entropy/simplex column:
/// min sum_i g_i a_i + gamma_i (a_i log(a_i / t_i) - a_i + t_i) over the simplex.
inline std::vector<double> prox_simplex_column(const std::vector<double>& t, const std::vector<double>& g,
                                               const std::vector<double>& gamma) {
  const std::size_t n = t.size();
  auto f = [&](const std::vector<double>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += g[i] * a[i] + gamma[i] * ((a[i] > 0.0 ? a[i] * std::log(a[i] / t[i]) : 0.0) - a[i] + t[i]);
    }
    return s;
  };
  double tot = std::accumulate(t.begin(), t.end(), 0.0);
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = t[i] / tot;
  double step = 1.0;
  for (int it = 0; it < 200000; ++it) {
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) grad[i] = g[i] + gamma[i] * std::log(std::max(a[i], 1e-300) / t[i]);
    const double fa = f(a);
    std::vector<double> next;
    step = std::min(step * 2.0, 1.0);
    while (true) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - step * grad[i];
      next = project_simplex(y);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        lin += grad[i] * (next[i] - a[i]);
        sq += (next[i] - a[i]) * (next[i] - a[i]);
      }
      if (f(next) <= fa + lin + sq / (2.0 * step) + 1e-15 || step < 1e-14) break;
      step *= 0.5;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - a[i]));
    a = next;
    if (change < 1e-14) break;
  }
  return a;
}

/// (1/(|F| I_n)) sum_{j,i} l(X(j,i), (H A^T)(j,i)) by explicit loops.
inline double sampled_objective(const smartcpd::LossSpec& loss, const Matrix& x, const Matrix& h, const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      double m = 0.0;
      for (Eigen::Index r = 0; r < h.cols(); ++r) m += h(j, r) * a(i, r);
      s += smartcpd::loss_value(loss, x(j, i), m);
    }
  }
  return s / static_cast<double>(x.rows() * x.cols());
}

/// Central differences of f at every entry of A, step h * max(1, |A(i,r)|).
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& a, double h = 1e-6) {
  Matrix g(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    Matrix p = a, m = a;
    const double step = h * std::max(1.0, std::abs(a.data()[k]));
    p.data()[k] += step;
    m.data()[k] -= step;
    g.data()[k] = (f(p) - f(m)) / (2.0 * step);
  }
  return g;
}

/// Exhaustive minimum over shared column permutations of the normalized-column MSE.
inline double brute_force_mse(const smartcpd::FactorModel& est, const smartcpd::FactorModel& truth) {
  const std::size_t n_modes = truth.order(), rank = truth.rank();
  std::vector<std::size_t> perm(rank);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t n = 0; n < n_modes; ++n) {
      for (std::size_t r = 0; r < rank; ++r) {
        const auto e = est.factor(n).col(perm[r]);
        const auto t = truth.factor(n).col(r);
        total += (e / e.norm() - t / t.norm()).squaredNorm();
      }
    }
    best = std::min(best, total / static_cast<double>(n_modes * rank));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Linearize-plus-Bregman surrogate of l(x, h^T a) around a_bar with scalings gamma.
inline double surrogate(const smartcpd::LossSpec& loss, const smartcpd::MirrorMap& map, double x,
                        const std::vector<double>& h, const std::vector<double>& a,
                        const std::vector<double>& a_bar, const std::vector<double>& gamma) {
  double m_bar = 0.0;
  for (std::size_t r = 0; r < h.size(); ++r) m_bar += h[r] * a_bar[r];
  const double d = smartcpd::loss_grad_m(loss, x, m_bar);
  double s = smartcpd::loss_value(loss, x, m_bar);
  for (std::size_t r = 0; r < h.size(); ++r) {
    s += d * h[r] * (a[r] - a_bar[r]) + gamma[r] * divergence(map, a[r], a_bar[r]);
  }
  return s;
}

}  // namespace oracle
