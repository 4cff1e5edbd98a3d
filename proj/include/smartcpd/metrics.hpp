#pragma once

// Factor-recovery error and objective evaluation.

#include <cstddef>
#include <optional>

#include "smartcpd/losses.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd {

/// (1/(N R)) sum_n sum_r || est_{n,pi(r)}/||.|| - truth_{n,r}/||.|| ||^2 with one
/// column permutation pi shared by all modes, chosen by optimal assignment.
/// Result lies in [0, 4]. Throws DomainError for a zero column.
double factor_mse(const FactorModel& estimate, const FactorModel& truth);

/// Column matching used by factor_mse: perm[r] is the estimate column paired
/// with truth column r.
std::vector<std::size_t> match_columns(const FactorModel& estimate, const FactorModel& truth);

struct FiberSample {
  std::size_t mode = 0;
  FiberSet fibers;
};

/// (1/|I|) sum_i l(X_i, M_i), or the average over the entries of the given
/// fibers when `subsample` is set. Throws DomainError with the coordinate of
/// the first entry outside the loss domain.
double objective_cost(const Tensor& tensor, const FactorModel& model, const LossSpec& loss,
                      const std::optional<FiberSample>& subsample = std::nullopt);

}  // namespace smartcpd
