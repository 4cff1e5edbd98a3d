#pragma once

// Sampled block gradients from fiber data:
//   G = (1 / (|F| I_n)) D^T H,  D(j, i) = dl/dm (X(j, i), (H A^T)(j, i)).

#include <cstddef>

#include "smartcpd/losses.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd {

/// D for the given data rows and model rows (both |F| x I_n). Throws
/// DomainError naming the offending (row, column) when an entry is outside
/// the loss domain.
Matrix loss_derivative(const LossSpec& loss, const Matrix& x_hat, const Matrix& model_hat);

/// x_hat is |F| x I_n, h_hat is |F| x R, a_t is I_n x R; returns I_n x R.
Matrix sampled_gradient(const LossSpec& loss, const Matrix& x_hat, const Matrix& h_hat, const Matrix& a_t);

/// Gradient of (1/|I|) sum_i l(X_i, M_i) with respect to A_mode, accumulated
/// over all fibers in fixed-size blocks.
Matrix full_gradient(const Tensor& tensor, const FactorModel& model, const LossSpec& loss, std::size_t mode);

}  // namespace smartcpd
