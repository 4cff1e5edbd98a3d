#pragma once

// OpenMP helpers. Every parallel kernel in the library goes through these so
// that exceptions never escape a parallel region and reductions use a fixed
// chunking, which keeps results identical for any thread count.

#include <cstdint>
#include <exception>
#include <mutex>
#include <vector>

#include <omp.h>

namespace smartcpd::parallel {

/// Loops with less estimated work than this run serially.
inline constexpr std::int64_t kMinParallelWork = 1 << 15;

/// Applies SMARTCPD_THREADS (if set and positive) to the OpenMP runtime.
/// Returns the resulting maximum thread count.
int configure_threads_from_env();

template <typename F>
void parallel_for(std::int64_t n, std::int64_t work_per_item, F&& body) {
  const bool go_parallel = n > 1 && n * work_per_item >= kMinParallelWork && omp_get_max_threads() > 1;
  if (!go_parallel) {
    for (std::int64_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    try {
      body(k);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Sum of term(k) over [0, n). Terms are grouped into fixed chunks of
/// `chunk` consecutive indices; chunk sums are added in order.
template <typename F>
double chunked_sum(std::int64_t n, std::int64_t chunk, std::int64_t work_per_item, F&& term) {
  if (n <= 0) return 0.0;
  const std::int64_t chunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
  parallel_for(chunks, chunk * work_per_item, [&](std::int64_t c) {
    const std::int64_t begin = c * chunk;
    const std::int64_t end = begin + chunk < n ? begin + chunk : n;
    double s = 0.0;
    for (std::int64_t k = begin; k < end; ++k) s += term(k);
    partial[static_cast<std::size_t>(c)] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace smartcpd::parallel
