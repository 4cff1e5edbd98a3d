#include "smartcpd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "smartcpd/assignment.hpp"
#include "smartcpd/errors.hpp"
#include "smartcpd/parallel.hpp"

namespace smartcpd {

namespace {

Matrix normalized_columns(const Matrix& a, const char* which, std::size_t mode) {
  Matrix out = a;
  for (Eigen::Index r = 0; r < a.cols(); ++r) {
    const double norm = a.col(r).norm();
    if (!(norm > 0.0)) {
      throw DomainError(std::string("factor_mse: column ") + std::to_string(r) + " of " + which + " mode " +
                        std::to_string(mode) + " is zero");
    }
    out.col(r) /= norm;
  }
  return out;
}

// cost(r, s) = sum_n || truth_n(:, r) - est_n(:, s) ||^2 on normalized columns.
Eigen::MatrixXd matching_cost(const FactorModel& estimate, const FactorModel& truth) {
  if (estimate.shape() != truth.shape() || estimate.rank() != truth.rank()) {
    throw std::invalid_argument("factor_mse: estimate and truth differ in shape or rank");
  }
  const auto rank = static_cast<Eigen::Index>(truth.rank());
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(rank, rank);
  for (std::size_t n = 0; n < truth.order(); ++n) {
    const Matrix t = normalized_columns(truth.factor(n), "truth", n);
    const Matrix e = normalized_columns(estimate.factor(n), "estimate", n);
    for (Eigen::Index r = 0; r < rank; ++r) {
      for (Eigen::Index s = 0; s < rank; ++s) cost(r, s) += (t.col(r) - e.col(s)).squaredNorm();
    }
  }
  return cost;
}

}  // namespace

std::vector<std::size_t> match_columns(const FactorModel& estimate, const FactorModel& truth) {
  return solve_assignment(matching_cost(estimate, truth));
}

double factor_mse(const FactorModel& estimate, const FactorModel& truth) {
  const Eigen::MatrixXd cost = matching_cost(estimate, truth);
  const std::vector<std::size_t> perm = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    total += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(perm[r]));
  }
  return total / (static_cast<double>(truth.order()) * static_cast<double>(truth.rank()));
}

namespace {

// Sum of the loss over the given fibers of one mode, in blocks of fibers
// whose partial sums are added in order.
double fiber_loss_sum(const Tensor& tensor, const FactorModel& model, const LossSpec& loss, std::size_t mode,
                      const FiberSet& fibers) {
  constexpr std::size_t kBlock = 128;
  const Matrix& a = model.factor(mode);
  const Unfolding unf(model.shape(), mode);
  const std::size_t blocks = (fibers.size() + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel::parallel_for(static_cast<std::int64_t>(blocks),
                         static_cast<std::int64_t>(kBlock * a.rows() * a.cols()), [&](std::int64_t b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = std::min(fibers.size(), begin + kBlock);
    const std::span<const std::uint64_t> rows(fibers.data() + begin, end - begin);
    const Matrix h = khatri_rao_rows(model, mode, rows);
    const Matrix x = extract_fibers(tensor, mode, rows);
    const Matrix m = h * a.transpose();
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const double xv = x(j, i);
        const double mv = m(j, i);
        if (!in_loss_domain(loss, xv, mv)) {
          std::vector<std::size_t> idx(model.order());
          unf.fiber_multi_index(rows[static_cast<std::size_t>(j)], idx);
          idx[mode] = static_cast<std::size_t>(i);
          std::string where;
          for (std::size_t k = 0; k < idx.size(); ++k) where += (k ? "," : "") + std::to_string(idx[k] + 1);
          throw DomainError("objective_cost: entry (" + where + ") outside the domain of loss " + loss.name() +
                            " (x = " + std::to_string(xv) + ", m = " + std::to_string(mv) + ")");
        }
        s += loss_value_unchecked(loss, xv, mv);
      }
    }
    partial[static_cast<std::size_t>(b)] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

double objective_cost(const Tensor& tensor, const FactorModel& model, const LossSpec& loss,
                      const std::optional<FiberSample>& subsample) {
  const Shape& shape = shape_of(tensor);
  if (shape != model.shape()) throw std::invalid_argument("objective_cost: tensor and model shapes differ");
  if (subsample) {
    if (subsample->mode >= shape.size()) throw std::invalid_argument("objective_cost: bad subsample mode");
    if (subsample->fibers.empty()) throw std::invalid_argument("objective_cost: empty fiber subsample");
    const Unfolding unf(shape, subsample->mode);
    for (std::uint64_t f : subsample->fibers) {
      if (f >= unf.num_fibers()) throw std::invalid_argument("objective_cost: fiber index out of range");
    }
    const double s = fiber_loss_sum(tensor, model, loss, subsample->mode, subsample->fibers);
    return s / (static_cast<double>(subsample->fibers.size()) * static_cast<double>(shape[subsample->mode]));
  }
  const Unfolding unf(shape, 0);
  FiberSet all(unf.num_fibers());
  for (std::uint64_t j = 0; j < all.size(); ++j) all[j] = j;
  return fiber_loss_sum(tensor, model, loss, 0, all) / static_cast<double>(num_entries(shape));
}

}  // namespace smartcpd
