#include "smartcpd/reference.hpp"

#include <stdexcept>
#include <vector>

namespace smartcpd::reference {

namespace {

// Calls body(index, offset) for every entry, first mode fastest.
template <typename F>
void for_each_entry(const Shape& shape, F&& body) {
  std::vector<std::size_t> idx(shape.size(), 0);
  const std::uint64_t total = num_entries(shape);
  for (std::uint64_t off = 0; off < total; ++off) {
    body(std::span<const std::size_t>(idx), off);
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
}

}  // namespace

Matrix unfold(const DenseTensor& tensor, std::size_t mode) {
  const Shape& shape = tensor.shape();
  const std::uint64_t rows = num_entries(shape) / shape.at(mode);
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(shape[mode]));
  const auto values = tensor.values();
  for_each_entry(shape, [&](std::span<const std::size_t> idx, std::uint64_t off) {
    std::uint64_t j = 0, stride = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (k == mode) continue;
      j += idx[k] * stride;
      stride *= shape[k];
    }
    out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(idx[mode])) = values[off];
  });
  return out;
}

Matrix khatri_rao(const FactorModel& model, std::size_t mode) {
  const auto rank = static_cast<Eigen::Index>(model.rank());
  Matrix acc = Matrix::Ones(1, rank);
  // Prepending a factor on the left makes its index the slower one.
  for (std::size_t k = 0; k < model.order(); ++k) {
    if (k == mode) continue;
    const Matrix& a = model.factor(k);
    Matrix next(a.rows() * acc.rows(), rank);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < acc.rows(); ++j) {
        for (Eigen::Index r = 0; r < rank; ++r) next(i * acc.rows() + j, r) = a(i, r) * acc(j, r);
      }
    }
    acc = std::move(next);
  }
  return acc;
}

DenseTensor full_tensor(const FactorModel& model) {
  DenseTensor out(model.shape());
  auto values = out.values();
  for_each_entry(model.shape(), [&](std::span<const std::size_t> idx, std::uint64_t off) {
    values[off] = cpd_entry(model, idx);
  });
  return out;
}

Matrix sampled_gradient(const LossSpec& loss, const Matrix& x_hat, const Matrix& h_hat, const Matrix& a_t) {
  if (x_hat.rows() != h_hat.rows() || x_hat.cols() != a_t.rows() || h_hat.cols() != a_t.cols()) {
    throw std::invalid_argument("reference::sampled_gradient: inconsistent shapes");
  }
  Matrix g = Matrix::Zero(a_t.rows(), a_t.cols());
  for (Eigen::Index j = 0; j < x_hat.rows(); ++j) {
    for (Eigen::Index i = 0; i < x_hat.cols(); ++i) {
      double m = 0.0;
      for (Eigen::Index r = 0; r < a_t.cols(); ++r) m += h_hat(j, r) * a_t(i, r);
      const double d = loss_grad_m(loss, x_hat(j, i), m);
      for (Eigen::Index r = 0; r < a_t.cols(); ++r) g(i, r) += d * h_hat(j, r);
    }
  }
  return g / (static_cast<double>(x_hat.rows()) * static_cast<double>(x_hat.cols()));
}

Matrix full_gradient(const DenseTensor& tensor, const FactorModel& model, const LossSpec& loss, std::size_t mode) {
  const Shape& shape = tensor.shape();
  if (shape != model.shape()) throw std::invalid_argument("reference::full_gradient: shape mismatch");
  Matrix g = Matrix::Zero(model.factor(mode).rows(), model.factor(mode).cols());
  const auto values = tensor.values();
  for_each_entry(shape, [&](std::span<const std::size_t> idx, std::uint64_t off) {
    const double d = loss_grad_m(loss, values[off], cpd_entry(model, idx));
    for (std::size_t r = 0; r < model.rank(); ++r) {
      double p = 1.0;
      for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k != mode) p *= model.factor(k)(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(r));
      }
      g(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(r)) += d * p;
    }
  });
  return g / static_cast<double>(num_entries(shape));
}

double objective_cost(const DenseTensor& tensor, const FactorModel& model, const LossSpec& loss) {
  const auto values = tensor.values();
  double s = 0.0;
  for_each_entry(tensor.shape(), [&](std::span<const std::size_t> idx, std::uint64_t off) {
    s += loss_value(loss, values[off], cpd_entry(model, idx));
  });
  return s / static_cast<double>(tensor.size());
}

}  // namespace smartcpd::reference
