#pragma once

// Serial, entry-by-entry implementations of the library kernels. They share no
// code paths with the blocked/parallel versions and serve as test oracles and
// benchmark baselines.

#include <cstddef>

#include "smartcpd/losses.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd::reference {

/// Full J_n x I_n mode-n unfolding.
Matrix unfold(const DenseTensor& tensor, std::size_t mode);

/// Full Khatri-Rao product A_N (.) ... (.) A_{n+1} (.) A_{n-1} (.) ... (.) A_1,
/// built by repeated column-wise Kronecker products.
Matrix khatri_rao(const FactorModel& model, std::size_t mode);

/// sum_r prod_n A_n(i_n, r) at every entry.
DenseTensor full_tensor(const FactorModel& model);

/// (1/(|F| I_n)) D^T H with D from per-entry loss_grad_m calls.
Matrix sampled_gradient(const LossSpec& loss, const Matrix& x_hat, const Matrix& h_hat, const Matrix& a_t);

/// Gradient of (1/|I|) sum_i l(X_i, M_i) in A_mode by the chain rule per entry.
Matrix full_gradient(const DenseTensor& tensor, const FactorModel& model, const LossSpec& loss, std::size_t mode);

/// (1/|I|) sum_i l(X_i, M_i) by enumerating entries.
double objective_cost(const DenseTensor& tensor, const FactorModel& model, const LossSpec& loss);

}  // namespace smartcpd::reference
