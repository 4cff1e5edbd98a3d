#pragma once

// Per-coordinate step-size matrices Gamma (the inverse step of the mirror
// update): Adagrad accumulation, Jensen majorization scalings and scalar
// schedules.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "smartcpd/bregman.hpp"
#include "smartcpd/losses.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd {

inline constexpr double kDefaultAdagradOffset = 1e-5;
inline constexpr double kDefaultGammaMin = 1e-8;
inline constexpr double kDefaultSwitchTol = 1e-4;

enum class ScheduleKind { constant, sqrt_horizon, diminishing, adagrad, jensen, mixed };

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::adagrad;
  double eta = 0.1;              // constant
  std::uint64_t horizon = 100;   // sqrt_horizon: eta = 1 / sqrt(T)
  double eta0 = 1.0;             // diminishing: eta0 / (1 + t)^alpha
  double alpha = 0.6;
  double b = kDefaultAdagradOffset;       // adagrad, and mixed after the switch
  // Count the current gradient in Gamma, so every step has |G / Gamma| < 1.
  // false gives the accumulate-after form, whose first step is G / sqrt(b).
  bool inclusive = true;
  double switch_tol = kDefaultSwitchTol;  // mixed

  static ScheduleSpec constant(double eta);
  static ScheduleSpec sqrt_horizon(std::uint64_t horizon);
  static ScheduleSpec diminishing(double eta0, double alpha);
  static ScheduleSpec adagrad(double b = kDefaultAdagradOffset, bool inclusive = true);
  static ScheduleSpec jensen();
  static ScheduleSpec mixed(double switch_tol = kDefaultSwitchTol, double b = kDefaultAdagradOffset);

  /// True for the schedules that produce a single scalar eta_t.
  bool is_scalar() const;
  void validate() const;
  std::string name() const;
};

/// "constant:0.1", "sqrt:T=400", "diminishing:eta0=1,alpha=0.6",
/// "adagrad", "adagrad:b=1e-5", "adagrad:b=1e-5,inclusive=0", "jensen",
/// "mixed:tol=1e-4,b=1e-5".
ScheduleSpec parse_schedule(std::string_view text);

/// eta_t for the scalar schedules; t counts from 0.
double scalar_eta(const ScheduleSpec& spec, std::uint64_t t);

/// Squared-gradient accumulators, one per mode.
class AdagradState {
 public:
  AdagradState(const Shape& shape, std::size_t rank, double b = kDefaultAdagradOffset, bool inclusive = false);

  /// Gamma = sqrt(accumulated G^2 + b) from the gradients seen so far, then
  /// adds g^2 into the accumulator. The first call returns sqrt(b). With
  /// `inclusive`, g^2 is added first.
  Matrix next_gamma(std::size_t mode, const Matrix& g);

  const Matrix& accumulator(std::size_t mode) const { return acc_.at(mode); }
  double offset() const { return b_; }

 private:
  std::vector<Matrix> acc_;
  double b_;
  bool inclusive_;
};

inline Matrix adagrad_gamma(AdagradState& state, std::size_t mode, const Matrix& g) {
  return state.next_gamma(mode, g);
}

/// The generator paired with the loss's Jensen scaling:
///   euclidean -> a^2/2, IS -> 1/a, generalized KL -> -log a,
///   beta > 2 -> a^beta, beta < 1 -> a^(beta - 1).
/// Throws ConfigError for losses without such a pairing (including
/// 1 < beta < 2, where no power generator majorizes the convex part).
MirrorMap jensen_mirror(const LossSpec& loss);

/// Coordinate scalings that make the mirror step minimize a majorizer of the
/// sampled objective, equal at a_t. x_hat is |F| x I_n, h_hat is |F| x R,
/// a_t is I_n x R. Includes the 1/(|F| I_n) averaging factor used by
/// sampled_gradient. Entries are floored at gamma_min.
Matrix jensen_gamma(const LossSpec& loss, const Matrix& x_hat, const Matrix& h_hat, const Matrix& a_t,
                    double gamma_min = kDefaultGammaMin);

/// Relative cost change between consecutive epochs, |c - c_prev| / |c_prev|
/// (0 when both are 0, infinity when only c_prev is).
double relative_change(double previous, double current);

/// |c - c_prev| / max(1, |c_prev|), the mixed schedule's switch test.
double damped_relative_change(double previous, double current);

}  // namespace smartcpd
