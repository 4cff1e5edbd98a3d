#pragma once

// Counter-based random streams: every (seed, counter) pair yields an
// independent SplitMix64 stream, so per-entry generation does not depend on
// how work is partitioned across threads.

#include <cstdint>
#include <limits>

namespace smartcpd {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// SplitMix64; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Stream `counter` of the family keyed by `seed`.
inline SplitMix64 stream_for(std::uint64_t seed, std::uint64_t counter) {
  return SplitMix64(mix64(mix64(seed) ^ mix64(counter ^ 0xD1B54A32D192ED03ULL)));
}

/// Derives an independent seed for a named sub-purpose.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) {
  return mix64(seed ^ mix64(purpose + 0x632BE59BD9B4E019ULL));
}

}  // namespace smartcpd
