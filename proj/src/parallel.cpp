#include "smartcpd/parallel.hpp"

#include <cstdlib>
#include <string>

namespace smartcpd::parallel {

int configure_threads_from_env() {
  if (const char* env = std::getenv("SMARTCPD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Ignore malformed values and keep the OpenMP default.
    }
  }
  return omp_get_max_threads();
}

}  // namespace smartcpd::parallel
