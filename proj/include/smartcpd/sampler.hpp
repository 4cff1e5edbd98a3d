#pragma once

// Seeded randomness for the solver: uniform block choice and uniform
// without-replacement fiber subsets.

#include <cstddef>
#include <cstdint>
#include <random>

#include "smartcpd/tensor.hpp"

namespace smartcpd {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed);

  /// Uniform mode in [0, order). Throws std::invalid_argument for order < 2.
  std::size_t sample_block(std::size_t order);

  /// `batch` distinct fibers drawn uniformly from [0, num_fibers), sorted.
  /// Throws std::invalid_argument unless 1 <= batch <= num_fibers.
  FiberSet sample_fibers(std::uint64_t num_fibers, std::uint64_t batch);

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// A seed from the system entropy source, for runs without --seed.
std::uint64_t entropy_seed();

}  // namespace smartcpd
