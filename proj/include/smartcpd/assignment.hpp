#pragma once

// Minimum-cost perfect assignment on a square cost matrix (Hungarian method,
// O(R^3) shortest augmenting paths).

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace smartcpd {

/// Returns col[row] minimizing sum_row cost(row, col[row]).
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace smartcpd
