#include "smartcpd/stationarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

#include "smartcpd/errors.hpp"
#include "smartcpd/gradient.hpp"
#include "smartcpd/metrics.hpp"
#include "smartcpd/rng.hpp"

namespace smartcpd {

namespace {

const MirrorMap& mirror_for(const std::vector<MirrorMap>& mirrors, std::size_t mode) {
  if (mirrors.empty()) throw std::invalid_argument("no mirror map given");
  return mirrors.size() == 1 ? mirrors[0] : mirrors.at(mode);
}

Matrix phi_prime_matrix(const MirrorMap& map, const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) out(i, r) = phi_prime(map, a(i, r));
  }
  return out;
}

double prox_objective(const FactorModel& b, const FactorModel& anchor, const Tensor& tensor, const LossSpec& loss,
                      const std::vector<MirrorMap>& mirrors, double lambda) {
  double v = objective_cost(tensor, b, loss);
  for (std::size_t n = 0; n < b.order(); ++n) {
    v += bregman_div(mirror_for(mirrors, n), b.factor(n), anchor.factor(n)) / (2.0 * lambda);
  }
  return v;
}

}  // namespace

ProxResult bregman_prox(const FactorModel& anchor, const Tensor& tensor, const LossSpec& loss,
                        const std::vector<MirrorMap>& mirrors, double lambda, const ProxOptions& options) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("prox lambda must be positive");
  const double c = 1.0 / (2.0 * lambda);
  FactorModel b = anchor;
  std::vector<Matrix> anchor_prime;
  for (std::size_t n = 0; n < anchor.order(); ++n) {
    anchor_prime.push_back(phi_prime_matrix(mirror_for(mirrors, n), anchor.factor(n)));
  }
  std::vector<double> scale(anchor.order(), 2.0 * c);
  std::vector<double> last_change(anchor.order(), 0.0);
  double value = prox_objective(b, anchor, tensor, loss, mirrors, lambda);
  ProxResult result;
  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t n = 0; n < b.order(); ++n) {
      const MirrorMap& map = mirror_for(mirrors, n);
      const Matrix current = b.factor(n);
      // The regularizer is itself a Bregman term in phi, so the linearized
      // step with total scaling Gamma solves the block model exactly.
      const Matrix grad = full_gradient(tensor, b, loss, n) + c * (phi_prime_matrix(map, current) - anchor_prime[n]);
      for (int attempt = 0;; ++attempt) {
        if (attempt > 200) throw ConvergenceError("bregman_prox: backtracking failed");
        const Matrix gamma = Matrix::Constant(current.rows(), current.cols(), scale[n]);
        Matrix next;
        try {
          next = md_update_with_retry(map, current, grad, gamma);
        } catch (const DomainExit&) {
          scale[n] *= 2.0;
          continue;
        }
        b.factor(n) = next;
        double trial = 0.0;
        bool ok = true;
        try {
          trial = prox_objective(b, anchor, tensor, loss, mirrors, lambda);
        } catch (const DomainError&) {
          ok = false;
        }
        const double model_bound = value + (grad.array() * (next - current).array()).sum() +
                                   scale[n] * bregman_div(map, next, current);
        if (ok && std::isfinite(trial) && trial <= model_bound + 1e-14 * std::max(1.0, std::abs(value))) {
          const double denom = std::max(1.0, current.cwiseAbs().maxCoeff());
          const double block_change = (next - current).cwiseAbs().maxCoeff() / denom;
          change = std::max(change, block_change);
          value = trial;
          // Near the solution the sufficient-decrease test cannot see increases
          // below rounding, so a growing block change is the sign of an
          // oscillating step: enlarge the scaling instead of relaxing it.
          if (sweep > 1 && block_change > last_change[n]) {
            scale[n] *= 2.0;
          } else {
            scale[n] = std::max(c, scale[n] / 1.5);
          }
          last_change[n] = block_change;
          break;
        }
        b.factor(n) = current;
        scale[n] *= 2.0;
      }
    }
    result.sweeps = sweep;
    result.residual = change;
    if (change < options.tol) {
      result.measure = 0.0;
      for (std::size_t n = 0; n < b.order(); ++n) {
        result.measure += bregman_div(mirror_for(mirrors, n), b.factor(n), anchor.factor(n));
      }
      result.minimizer = std::move(b);
      return result;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "bregman_prox: no convergence after %zu sweeps (residual %.3e, tolerance %.1e)",
                options.max_sweeps, result.residual, options.tol);
  throw ConvergenceError(buf);
}

double stationarity_measure(const FactorModel& model, const Tensor& tensor, const LossSpec& loss,
                            const std::vector<MirrorMap>& mirrors, double lambda, const ProxOptions& options) {
  return bregman_prox(model, tensor, loss, mirrors, lambda, options).measure;
}

double estimate_smoothness(const FactorModel& model, const Tensor& tensor, const LossSpec& loss,
                           const std::vector<MirrorMap>& mirrors, std::uint64_t seed, int probes) {
  const Shape shape = model.shape();
  if (shape != shape_of(tensor)) throw std::invalid_argument("estimate_smoothness: shape mismatch");
  std::mt19937_64 engine(derive_seed(seed, 5));
  const double total = static_cast<double>(num_entries(shape));
  std::vector<Matrix> h(model.order()), x(model.order()), m(model.order()), w(model.order());
  double best = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, model.order() - 1)(engine);
    const auto i = static_cast<Eigen::Index>(std::uniform_int_distribution<std::size_t>(0, shape[n] - 1)(engine));
    const auto r = static_cast<Eigen::Index>(std::uniform_int_distribution<std::size_t>(0, model.rank() - 1)(engine));
    if (h[n].size() == 0) {
      const Unfolding unf(shape, n);
      FiberSet all(unf.num_fibers());
      for (std::uint64_t j = 0; j < all.size(); ++j) all[j] = j;
      h[n] = khatri_rao_rows(model, n, all);
      x[n] = extract_fibers(tensor, n, all);
      m[n] = h[n] * model.factor(n).transpose();
      w[n] = h[n].rowwise().squaredNorm();
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < h[n].rows(); ++j) {
      s += std::abs(loss_hess_m(loss, x[n](j, i), m[n](j, i))) * w[n](j, 0);
    }
    const double curvature = s / total / phi_second(mirror_for(mirrors, n), model.factor(n)(i, r));
    best = std::max(best, curvature);
  }
  return std::max(best, 1e-8);
}

}  // namespace smartcpd
