#include "smartcpd/sampler.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace smartcpd {

Sampler::Sampler(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::size_t Sampler::sample_block(std::size_t order) {
  if (order < 2) throw std::invalid_argument("sample_block: tensor order must be at least 2");
  std::uniform_int_distribution<std::size_t> dist(0, order - 1);
  return dist(engine_);
}

// Floyd's algorithm: B draws, O(B) memory, uniform over B-subsets.
FiberSet Sampler::sample_fibers(std::uint64_t num_fibers, std::uint64_t batch) {
  if (batch < 1 || batch > num_fibers) {
    throw std::invalid_argument("sample_fibers: batch " + std::to_string(batch) + " not in [1, " +
                                std::to_string(num_fibers) + "]");
  }
  FiberSet out;
  out.reserve(batch);
  if (batch == num_fibers) {
    for (std::uint64_t j = 0; j < num_fibers; ++j) out.push_back(j);
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(batch * 2);
  for (std::uint64_t j = num_fibers - batch; j < num_fibers; ++j) {
    std::uniform_int_distribution<std::uint64_t> dist(0, j);
    const std::uint64_t t = dist(engine_);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
}

}  // namespace smartcpd
