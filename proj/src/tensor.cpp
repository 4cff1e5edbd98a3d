#include "smartcpd/tensor.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "smartcpd/parallel.hpp"

namespace smartcpd {

namespace {

std::vector<std::uint64_t> dense_strides(const Shape& shape) {
  std::vector<std::uint64_t> strides(shape.size());
  std::uint64_t s = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    strides[k] = s;
    s *= shape[k];
  }
  return strides;
}

void check_index(const Shape& shape, std::span<const std::size_t> index) {
  if (index.size() != shape.size()) {
    throw std::out_of_range("index has " + std::to_string(index.size()) + " components, tensor has order " +
                            std::to_string(shape.size()));
  }
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (index[k] >= shape[k]) {
      throw std::out_of_range("index component " + std::to_string(k) + " = " + std::to_string(index[k]) +
                              " out of range [0, " + std::to_string(shape[k]) + ")");
    }
  }
}

void check_mode(std::size_t order, std::size_t mode) {
  if (mode >= order) {
    throw std::invalid_argument("mode " + std::to_string(mode) + " invalid for order-" + std::to_string(order) +
                                " tensor");
  }
}

}  // namespace

std::uint64_t num_entries(const Shape& shape) {
  std::uint64_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
      throw std::overflow_error("tensor entry count overflows 64 bits");
    }
    n *= d;
  }
  return n;
}

void validate_shape(const Shape& shape) {
  if (shape.size() < 2) throw std::invalid_argument("tensor order must be at least 2");
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
  }
  (void)num_entries(shape);
}

// ---------------------------------------------------------------------------
// DenseTensor

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  strides_ = dense_strides(shape_);
  values_.assign(num_entries(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  validate_shape(shape_);
  strides_ = dense_strides(shape_);
  if (values_.size() != num_entries(shape_)) {
    throw std::invalid_argument("dense tensor needs " + std::to_string(num_entries(shape_)) + " values, got " +
                                std::to_string(values_.size()));
  }
}

std::uint64_t DenseTensor::offset(std::span<const std::size_t> index) const {
  check_index(shape_, index);
  std::uint64_t off = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) off += index[k] * strides_[k];
  return off;
}

// ---------------------------------------------------------------------------
// CooTensor

CooTensor::CooTensor(Shape shape, std::vector<std::size_t> indices, std::vector<double> values)
    : shape_(std::move(shape)), indices_(std::move(indices)), values_(std::move(values)) {
  validate_shape(shape_);
  strides_ = dense_strides(shape_);
  const std::size_t n = shape_.size();
  if (indices_.size() != values_.size() * n) {
    throw std::invalid_argument("COO index array size does not match entry count");
  }
  lookup_.reserve(values_.size());
  for (std::size_t k = 0; k < values_.size(); ++k) {
    std::span<const std::size_t> idx{indices_.data() + k * n, n};
    check_index(shape_, idx);
    std::uint64_t off = 0;
    for (std::size_t m = 0; m < n; ++m) off += idx[m] * strides_[m];
    auto [it, inserted] = lookup_.emplace(off, k);
    if (!inserted) {
      std::string where;
      for (std::size_t m = 0; m < n; ++m) where += (m ? "," : "") + std::to_string(idx[m] + 1);
      throw std::invalid_argument("duplicate COO entry at (" + where + ")");
    }
  }
}

CooTensor CooTensor::from_dense(const DenseTensor& dense) {
  const Shape& shape = dense.shape();
  const std::size_t n = shape.size();
  std::vector<std::size_t> indices;
  std::vector<double> values;
  std::vector<std::size_t> idx(n, 0);
  const auto vals = dense.values();
  for (std::uint64_t off = 0; off < vals.size(); ++off) {
    if (vals[off] != 0.0) {
      indices.insert(indices.end(), idx.begin(), idx.end());
      values.push_back(vals[off]);
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return CooTensor(shape, std::move(indices), std::move(values));
}

DenseTensor CooTensor::to_dense() const {
  DenseTensor dense(shape_);
  auto vals = dense.values();
  for (const auto& [off, k] : lookup_) vals[off] = values_[k];
  return dense;
}

double CooTensor::value_at_offset(std::uint64_t offset) const {
  auto it = lookup_.find(offset);
  return it == lookup_.end() ? 0.0 : values_[it->second];
}

double CooTensor::operator()(std::span<const std::size_t> index) const {
  check_index(shape_, index);
  std::uint64_t off = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) off += index[k] * strides_[k];
  return value_at_offset(off);
}

const Shape& shape_of(const Tensor& tensor) {
  return std::visit([](const auto& t) -> const Shape& { return t.shape(); }, tensor);
}

// ---------------------------------------------------------------------------
// Unfolding

Unfolding::Unfolding(const Shape& shape, std::size_t mode) : shape_(shape), mode_(mode) {
  validate_shape(shape_);
  check_mode(shape_.size(), mode_);
  dense_strides_ = dense_strides(shape_);
  fiber_strides_.assign(shape_.size(), 0);
  std::uint64_t j = 1;
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (k == mode_) continue;
    fiber_strides_[k] = j;
    j *= shape_[k];
  }
  num_fibers_ = j;
}

std::uint64_t Unfolding::fiber_index(std::span<const std::size_t> index) const {
  check_index(shape_, index);
  std::uint64_t j = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) j += index[k] * fiber_strides_[k];
  return j;
}

void Unfolding::fiber_multi_index(std::uint64_t fiber, std::span<std::size_t> index) const {
  if (fiber >= num_fibers_) {
    throw std::out_of_range("fiber " + std::to_string(fiber) + " out of range [0, " + std::to_string(num_fibers_) +
                            ")");
  }
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (k == mode_) {
      index[k] = 0;
      continue;
    }
    index[k] = static_cast<std::size_t>(fiber % shape_[k]);
    fiber /= shape_[k];
  }
}

std::uint64_t Unfolding::fiber_base_offset(std::uint64_t fiber) const {
  if (fiber >= num_fibers_) {
    throw std::out_of_range("fiber " + std::to_string(fiber) + " out of range [0, " + std::to_string(num_fibers_) +
                            ")");
  }
  std::uint64_t off = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (k == mode_) continue;
    off += (fiber % shape_[k]) * dense_strides_[k];
    fiber /= shape_[k];
  }
  return off;
}

std::uint64_t mode_unfold_index(const Shape& shape, std::size_t mode, std::span<const std::size_t> index) {
  return Unfolding(shape, mode).fiber_index(index);
}

// ---------------------------------------------------------------------------
// FactorModel

FactorModel::FactorModel(std::vector<Matrix> factors) : factors_(std::move(factors)) {
  if (factors_.size() < 2) throw std::invalid_argument("a CPD model needs at least two factors");
  rank_ = static_cast<std::size_t>(factors_.front().cols());
  if (rank_ == 0) throw std::invalid_argument("CPD rank must be at least 1");
  for (const auto& a : factors_) {
    if (static_cast<std::size_t>(a.cols()) != rank_) {
      throw std::invalid_argument("all factors must share the same column count");
    }
    if (a.rows() == 0) throw std::invalid_argument("factor with zero rows");
  }
}

Shape FactorModel::shape() const {
  Shape s;
  s.reserve(factors_.size());
  for (const auto& a : factors_) s.push_back(static_cast<std::size_t>(a.rows()));
  return s;
}

bool FactorModel::operator==(const FactorModel& other) const {
  if (factors_.size() != other.factors_.size()) return false;
  for (std::size_t n = 0; n < factors_.size(); ++n) {
    if (factors_[n].rows() != other.factors_[n].rows() || factors_[n].cols() != other.factors_[n].cols()) {
      return false;
    }
    if (factors_[n] != other.factors_[n]) return false;
  }
  return true;
}

double cpd_entry(const FactorModel& model, std::span<const std::size_t> index) {
  const Shape shape = model.shape();
  check_index(shape, index);
  double total = 0.0;
  for (std::size_t r = 0; r < model.rank(); ++r) {
    double p = 1.0;
    for (std::size_t n = 0; n < model.order(); ++n) p *= model.factor(n)(static_cast<Eigen::Index>(index[n]), r);
    total += p;
  }
  return total;
}

Matrix khatri_rao_rows(const FactorModel& model, std::size_t mode, std::span<const std::uint64_t> fibers) {
  const Shape shape = model.shape();
  const Unfolding unfold(shape, mode);
  const std::size_t order = shape.size();
  const auto rank = static_cast<Eigen::Index>(model.rank());
  for (std::uint64_t j : fibers) {
    if (j >= unfold.num_fibers()) {
      throw std::out_of_range("fiber " + std::to_string(j) + " out of range [0, " +
                              std::to_string(unfold.num_fibers()) + ")");
    }
  }
  Matrix h(static_cast<Eigen::Index>(fibers.size()), rank);
  parallel::parallel_for(static_cast<std::int64_t>(fibers.size()), static_cast<std::int64_t>(order) * rank,
                         [&](std::int64_t row) {
                           std::uint64_t rem = fibers[static_cast<std::size_t>(row)];
                           auto out = h.row(row);
                           out.setOnes();
                           for (std::size_t k = 0; k < order; ++k) {
                             if (k == mode) continue;
                             const auto ik = static_cast<Eigen::Index>(rem % shape[k]);
                             rem /= shape[k];
                             out.array() *= model.factor(k).row(ik).array();
                           }
                         });
  return h;
}

Matrix extract_fibers(const DenseTensor& tensor, std::size_t mode, std::span<const std::uint64_t> fibers) {
  const Unfolding unfold(tensor.shape(), mode);
  const auto len = static_cast<Eigen::Index>(unfold.fiber_length());
  const std::uint64_t stride = unfold.fiber_stride();
  const auto vals = tensor.values();
  Matrix x(static_cast<Eigen::Index>(fibers.size()), len);
  parallel::parallel_for(static_cast<std::int64_t>(fibers.size()), len, [&](std::int64_t row) {
    const std::uint64_t base = unfold.fiber_base_offset(fibers[static_cast<std::size_t>(row)]);
    for (Eigen::Index i = 0; i < len; ++i) x(row, i) = vals[base + static_cast<std::uint64_t>(i) * stride];
  });
  return x;
}

Matrix extract_fibers(const CooTensor& tensor, std::size_t mode, std::span<const std::uint64_t> fibers) {
  const Unfolding unfold(tensor.shape(), mode);
  const auto len = static_cast<Eigen::Index>(unfold.fiber_length());
  const std::uint64_t stride = unfold.fiber_stride();
  Matrix x(static_cast<Eigen::Index>(fibers.size()), len);
  parallel::parallel_for(static_cast<std::int64_t>(fibers.size()), 8 * len, [&](std::int64_t row) {
    const std::uint64_t base = unfold.fiber_base_offset(fibers[static_cast<std::size_t>(row)]);
    for (Eigen::Index i = 0; i < len; ++i) {
      x(row, i) = tensor.value_at_offset(base + static_cast<std::uint64_t>(i) * stride);
    }
  });
  return x;
}

Matrix extract_fibers(const Tensor& tensor, std::size_t mode, std::span<const std::uint64_t> fibers) {
  return std::visit([&](const auto& t) { return extract_fibers(t, mode, fibers); }, tensor);
}

DenseTensor full_tensor(const FactorModel& model) {
  const Shape shape = model.shape();
  DenseTensor out(shape);
  // Mode-0 unfolding: M_0 = H_0 A_0^T, fiber j is contiguous in memory.
  const Unfolding unfold(shape, 0);
  const auto len = static_cast<Eigen::Index>(shape[0]);
  auto vals = out.values();
  const std::uint64_t fibers = unfold.num_fibers();
  const std::int64_t block = 256;
  const std::int64_t blocks = static_cast<std::int64_t>((fibers + block - 1) / block);
  parallel::parallel_for(blocks, block * len * static_cast<std::int64_t>(model.rank()), [&](std::int64_t b) {
    const std::uint64_t begin = static_cast<std::uint64_t>(b * block);
    const std::uint64_t end = std::min<std::uint64_t>(begin + block, fibers);
    FiberSet ids(end - begin);
    for (std::uint64_t j = begin; j < end; ++j) ids[j - begin] = j;
    const Matrix h = khatri_rao_rows(model, 0, ids);
    const Matrix m = h * model.factor(0).transpose();
    for (std::uint64_t j = begin; j < end; ++j) {
      const std::uint64_t base = unfold.fiber_base_offset(j);
      for (Eigen::Index i = 0; i < len; ++i) vals[base + static_cast<std::uint64_t>(i)] = m(j - begin, i);
    }
  });
  return out;
}

}  // namespace smartcpd
