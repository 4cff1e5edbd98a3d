#pragma once

// Ground-truth factors and observation models for synthetic experiments.

#include <cstdint>
#include <string>
#include <string_view>

#include "smartcpd/tensor.hpp"

namespace smartcpd {

enum class Observation { none, poisson, bernoulli_odds, gamma, gaussian };

struct GeneratorSpec {
  Shape shape;
  std::size_t rank = 1;
  double a_max = 0.5;
  double heavy_frac = 0.05;
  double heavy_scale = 10.0;
  Observation observation = Observation::poisson;
  double snr_db = 20.0;  // gamma and gaussian
  std::uint64_t seed = 0;
  bool simplex = false;

  void validate() const;
};

Observation parse_observation(std::string_view text);
std::string observation_name(Observation obs);

/// Entries i.i.d. U(0, a_max); in each column ceil(heavy_frac I_n) distinct
/// entries are redrawn from U(0, heavy_scale a_max). With `simplex`, every
/// column is scaled to sum to 1.
FactorModel gen_factors(const GeneratorSpec& spec);

/// Draws X from M = [[A_1, ..., A_N]] under spec.observation:
///   poisson   X ~ Poisson(M)
///   bernoulli X ~ Bernoulli(M / (1 + M))
///   gamma     X = M * W, W ~ Gamma(k, 1/k), k = 10^(snr_db/10)
///   gaussian  X = M + e, e ~ N(0, s^2), s^2 = ||M||^2 / (|I| 10^(snr_db/10))
///   none      X = M
/// Each entry uses its own counter-based stream, so the result does not
/// depend on the thread count.
DenseTensor observe(const FactorModel& model, const GeneratorSpec& spec);

/// 10 log10(||M||^2 / ||X - M||^2); +inf when X == M.
double realized_snr_db(const DenseTensor& model, const DenseTensor& observed);

}  // namespace smartcpd
