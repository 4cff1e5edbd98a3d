#pragma once

// Approximate stationarity diagnostic: the Bregman proximal point
//   A_hat = argmin_B F(B) + h(B) + (1 / (2 lambda)) sum_n D_phi_n(B_n, A_n)
// and the measure D_phi(A_hat, A), which is zero exactly at stationary points.
// Full-batch work; intended for small tensors.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smartcpd/bregman.hpp"
#include "smartcpd/losses.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd {

struct ProxOptions {
  double tol = 1e-9;              // max relative block change after a sweep
  std::size_t max_sweeps = 20000;
};

struct ProxResult {
  FactorModel minimizer;
  double measure = 0.0;   // sum_n D_phi_n(A_hat_n, A_n)
  std::size_t sweeps = 0;
  double residual = 0.0;  // last sweep's relative change
};

/// Block mirror descent with backtracking on the per-block scaling. Throws
/// ConvergenceError (reporting the residual) when max_sweeps is reached.
ProxResult bregman_prox(const FactorModel& anchor, const Tensor& tensor, const LossSpec& loss,
                        const std::vector<MirrorMap>& mirrors, double lambda, const ProxOptions& options = {});

double stationarity_measure(const FactorModel& model, const Tensor& tensor, const LossSpec& loss,
                            const std::vector<MirrorMap>& mirrors, double lambda,
                            const ProxOptions& options = {});

/// Heuristic relative-smoothness constant: the largest of `probes` random
/// coordinate curvature ratios (1/|I|) sum_j |l''| ||h_j||^2 / phi''(a) at the
/// current model.
double estimate_smoothness(const FactorModel& model, const Tensor& tensor, const LossSpec& loss,
                           const std::vector<MirrorMap>& mirrors, std::uint64_t seed, int probes = 100);

/// lambda = 1 / (4 L_hat), inside the admissible (0, 1 / (2 L)) range when
/// L_hat is not an underestimate.
inline double default_prox_lambda(double smoothness) { return 1.0 / (4.0 * smoothness); }

}  // namespace smartcpd
