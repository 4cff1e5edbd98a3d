#include "smartcpd/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace smartcpd {

// Potentials u (rows) and v (columns); rows are added one at a time and
// matched along a shortest augmenting path in the reduced costs.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost matrix must be square");
  if (!cost.allFinite()) throw std::invalid_argument("solve_assignment: non-finite cost");
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t sz = static_cast<std::size_t>(n) + 1;
  std::vector<double> u(sz, 0.0), v(sz, 0.0), minv(sz);
  std::vector<std::size_t> match(sz, 0), way(sz, 0);  // match[col] = row, 1-based, 0 = free
  std::vector<bool> used(sz);
  for (std::size_t row = 1; row < sz; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[col0] = true;
      const std::size_t r0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c < sz; ++c) {
        if (used[c]) continue;
        const double reduced = cost(static_cast<Eigen::Index>(r0 - 1), static_cast<Eigen::Index>(c - 1)) - u[r0] - v[c];
        if (reduced < minv[c]) {
          minv[c] = reduced;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c < sz; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> result(static_cast<std::size_t>(n));
  for (std::size_t c = 1; c < sz; ++c) result[match[c] - 1] = c - 1;
  return result;
}

}  // namespace smartcpd
