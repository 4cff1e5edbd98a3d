#pragma once

// Fiber-sampled, block-randomized stochastic mirror descent for CPD.
//
// Each iteration samples a mode n and a set F of mode-n fibers, then repeats
// `inner_iters` times on the same fibers: sampled gradient, step-size matrix,
// closed-form mirror step on A_n. All other factors stay untouched.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "smartcpd/bregman.hpp"
#include "smartcpd/losses.hpp"
#include "smartcpd/stepsize.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd {

struct SolverConfig {
  LossSpec loss = LossSpec::gen_kl();
  std::vector<MirrorMap> mirrors = {MirrorMap::entropy()};  // one shared map, or one per mode
  ScheduleSpec schedule = ScheduleSpec::adagrad();
  std::size_t batch_fibers = 0;  // 0 selects 2R
  std::size_t inner_iters = 1;
  std::size_t max_epochs = 100;
  std::uint64_t max_iterations = 0;  // 0 means no iteration cap
  double stop_tol = 1e-3;            // relative change of the tracked cost between epochs
  std::uint64_t seed = 0;
  std::uint64_t eval_every = 0;      // extra trace rows every this many iterations; 0 for epochs only
  std::uint64_t full_cost_limit = 10'000'000;  // larger tensors track a held-out cost
  double heldout_fraction = 0.01;
  double stationarity_lambda = 0.0;  // > 0 fills the stationarity column
  int max_domain_retries = 20;

  const MirrorMap& mirror(std::size_t mode) const;
  std::size_t batch_for(std::size_t rank) const { return batch_fibers == 0 ? 2 * rank : batch_fibers; }

  /// Throws ConfigError for incompatible loss / mirror / schedule choices and
  /// std::invalid_argument for out-of-range numbers.
  void validate(std::size_t order) const;
};

/// Throws ConfigError naming the pair when the mirror cannot serve the loss.
void validate_pairing(const LossSpec& loss, const MirrorMap& mirror);

struct TraceRecord {
  std::uint64_t iteration = 0;
  std::uint64_t samples = 0;  // tensor entries drawn so far; |I| per epoch
  double seconds = 0.0;
  double cost = 0.0;
  std::optional<double> mse;
  std::optional<double> stationarity;
};

struct SolverHooks {
  const FactorModel* truth = nullptr;  // fills the mse column
  std::function<void(const TraceRecord&)> on_record;
  /// Called after every outer iteration with the updated mode.
  std::function<void(std::uint64_t iteration, std::size_t mode, const FactorModel&)> on_iteration;
};

struct SolverResult {
  FactorModel model;
  std::vector<TraceRecord> trace;
  std::uint64_t iterations = 0;
  std::size_t epochs = 0;
  bool converged = false;        // stopped by stop_tol
  bool switched = false;         // mixed schedule moved to Adagrad
  std::uint64_t domain_retries = 0;
};

SolverResult smartcpd(const Tensor& tensor, const SolverConfig& config, const FactorModel& init,
                      const SolverHooks& hooks = {});

/// U(0.1, 1.1) entries for positive-domain mirrors, U(0, 1) for quadratic,
/// U(0, 1) then column-normalized for simplex.
FactorModel default_init(const Shape& shape, std::size_t rank, const SolverConfig& config);

}  // namespace smartcpd
