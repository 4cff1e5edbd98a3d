#pragma once

// Dense and sparse (COO) tensor storage, mode-n unfolding index arithmetic,
// fiber extraction and on-demand Khatri-Rao rows.
//
// All indices in this C++ interface are 0-based. Files and the command line
// use 1-based indices; the conversion happens in io.cpp.
//
// Dense storage order: the first mode varies fastest, so the offset of
// (i_1, ..., i_N) is sum_k i_k * S_k with S_k = I_1 * ... * I_{k-1}.

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace smartcpd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<std::size_t>;
using FiberSet = std::vector<std::uint64_t>;

/// Number of entries in a tensor of the given shape. Throws on overflow.
std::uint64_t num_entries(const Shape& shape);

/// Checks N >= 2 and every I_n >= 1.
void validate_shape(const Shape& shape);

class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::uint64_t size() const { return values_.size(); }

  std::uint64_t offset(std::span<const std::size_t> index) const;
  double operator()(std::span<const std::size_t> index) const { return values_[offset(index)]; }
  double& operator()(std::span<const std::size_t> index) { return values_[offset(index)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Stride of mode n in the flat value array.
  std::uint64_t stride(std::size_t mode) const { return strides_[mode]; }

 private:
  Shape shape_;
  std::vector<std::uint64_t> strides_;
  std::vector<double> values_;
};

/// Sparse tensor: absent entries are zero. Multi-indices are stored flat,
/// `order()` indices per entry. Duplicates are rejected at construction.
class CooTensor {
 public:
  CooTensor() = default;
  CooTensor(Shape shape, std::vector<std::size_t> indices, std::vector<double> values);

  static CooTensor from_dense(const DenseTensor& dense);
  DenseTensor to_dense() const;

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t nnz() const { return values_.size(); }
  std::uint64_t size() const { return num_entries(shape_); }

  std::span<const std::size_t> index(std::size_t k) const {
    return {indices_.data() + k * order(), order()};
  }
  double value(std::size_t k) const { return values_[k]; }

  /// Value at a dense (first-mode-fastest) offset; zero when absent.
  double value_at_offset(std::uint64_t offset) const;
  double operator()(std::span<const std::size_t> index) const;

 private:
  Shape shape_;
  std::vector<std::uint64_t> strides_;
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
  std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

using Tensor = std::variant<DenseTensor, CooTensor>;

const Shape& shape_of(const Tensor& tensor);

/// Index arithmetic for the mode-n unfolding, a J_n x I_n matrix whose rows
/// are the mode-n fibers. Fiber j enumerates the remaining indices with the
/// lowest remaining mode fastest.
class Unfolding {
 public:
  Unfolding(const Shape& shape, std::size_t mode);

  std::size_t mode() const { return mode_; }
  std::uint64_t num_fibers() const { return num_fibers_; }
  std::size_t fiber_length() const { return shape_[mode_]; }

  /// Row j of the unfolding holding entry `index` (index[mode] is ignored).
  std::uint64_t fiber_index(std::span<const std::size_t> index) const;

  /// Inverse of fiber_index; writes every component except `mode`, which is set to 0.
  void fiber_multi_index(std::uint64_t fiber, std::span<std::size_t> index) const;

  /// Dense offset of (fiber, i_n = 0) and the stride along the fiber.
  std::uint64_t fiber_base_offset(std::uint64_t fiber) const;
  std::uint64_t fiber_stride() const { return dense_strides_[mode_]; }

 private:
  Shape shape_;
  std::size_t mode_;
  std::uint64_t num_fibers_;
  std::vector<std::uint64_t> dense_strides_;
  std::vector<std::uint64_t> fiber_strides_;  // J_k, zero for k == mode
};

/// j for entry `index` in the mode-n unfolding.
std::uint64_t mode_unfold_index(const Shape& shape, std::size_t mode, std::span<const std::size_t> index);

/// The decision variables: N factor matrices A_n (I_n x R).
class FactorModel {
 public:
  FactorModel() = default;
  explicit FactorModel(std::vector<Matrix> factors);

  std::size_t order() const { return factors_.size(); }
  std::size_t rank() const { return rank_; }
  Shape shape() const;

  const Matrix& factor(std::size_t mode) const { return factors_.at(mode); }
  Matrix& factor(std::size_t mode) { return factors_.at(mode); }
  const std::vector<Matrix>& factors() const { return factors_; }

  bool operator==(const FactorModel& other) const;

 private:
  std::vector<Matrix> factors_;
  std::size_t rank_ = 0;
};

/// sum_r prod_n A_n(i_n, r).
double cpd_entry(const FactorModel& model, std::span<const std::size_t> index);

/// Rows `fibers` of H_n = A_N (.) ... (.) A_{n+1} (.) A_{n-1} (.) ... (.) A_1,
/// built without forming the full product.
Matrix khatri_rao_rows(const FactorModel& model, std::size_t mode, std::span<const std::uint64_t> fibers);

/// Rows `fibers` of the mode-n unfolding X_n, densified.
Matrix extract_fibers(const DenseTensor& tensor, std::size_t mode, std::span<const std::uint64_t> fibers);
Matrix extract_fibers(const CooTensor& tensor, std::size_t mode, std::span<const std::uint64_t> fibers);
Matrix extract_fibers(const Tensor& tensor, std::size_t mode, std::span<const std::uint64_t> fibers);

/// Dense model tensor M.
DenseTensor full_tensor(const FactorModel& model);

}  // namespace smartcpd
