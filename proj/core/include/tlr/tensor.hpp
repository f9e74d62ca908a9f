#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace tlr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Zero-based index into a D-mode tensor.
using MultiIndex = std::vector<int>;

/// Mode sizes [N_1, ..., N_D] of a D-mode tensor.
class TensorShape {
 public:
  TensorShape() = default;
  explicit TensorShape(std::vector<int> dims);

  int num_modes() const { return static_cast<int>(dims_.size()); }
  int dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode)); }
  const std::vector<int>& dims() const { return dims_; }

  /// Total number of entries, prod_d N_d.
  std::int64_t num_entries() const;

  /// Row-major flat offset (last index fastest).
  std::int64_t flat_index(const MultiIndex& idx) const;

  bool contains(const MultiIndex& idx) const;
  void check_index(const MultiIndex& idx) const;

  bool operator==(const TensorShape& other) const { return dims_ == other.dims_; }

  std::string to_string() const;

 private:
  std::vector<int> dims_;
};

/// Dense row-major tensor. Workspace for oracles and ALS fitting only;
/// materialization is capped (see kDenseCapacity).
class DenseTensor {
 public:
  /// Largest entry count a dense tensor may hold.
  static constexpr std::int64_t kDenseCapacity = 10'000'000;

  DenseTensor() = default;
  explicit DenseTensor(TensorShape shape);
  DenseTensor(TensorShape shape, std::vector<double> data);

  const TensorShape& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double at(const MultiIndex& idx) const { return data_[static_cast<std::size_t>(shape_.flat_index(idx))]; }
  double& at(const MultiIndex& idx) { return data_[static_cast<std::size_t>(shape_.flat_index(idx))]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double frobenius_norm() const;

 private:
  TensorShape shape_;
  std::vector<double> data_;
};

/// Low-rank tensor as D factor matrices, factor d of size N_d x K; the entry
/// at index i is sum_k prod_d factors[d](i_d, k).
class ParafacModel {
 public:
  ParafacModel() = default;
  ParafacModel(TensorShape shape, int rank, std::vector<Mat> factors);

  /// Factors filled with a constant (handy for tests and zero critics).
  static ParafacModel constant(const TensorShape& shape, int rank, double value);

  const TensorShape& shape() const { return shape_; }
  int rank() const { return rank_; }
  int num_modes() const { return shape_.num_modes(); }
  const std::vector<Mat>& factors() const { return factors_; }
  const Mat& factor(int mode) const { return factors_.at(static_cast<std::size_t>(mode)); }
  Mat& factor(int mode) { return factors_.at(static_cast<std::size_t>(mode)); }

  /// Entry evaluation: sum_k prod_d factors[d](i_d, k).
  double entry(const MultiIndex& idx) const;

  /// Fiber along the last mode with the first D-1 indices fixed. Accumulates
  /// the length-K product over the leading modes once, then applies the last
  /// factor, so the cost is O(K(D + N_D)) rather than O(K D N_D).
  Vec fiber_last_mode(const MultiIndex& prefix) const;

  /// All entries finite?
  bool is_finite() const;

 private:
  TensorShape shape_;
  int rank_ = 0;
  std::vector<Mat> factors_;
};

/// Column-wise Kronecker product: column k of the result is kron(A.col(k),
/// B.col(k)); rows of A vary slowest.
Mat khatri_rao(const Mat& a, const Mat& b);

/// Matricization along `mode`: the chained Khatri-Rao product of the other
/// factors (in increasing mode order) times the transpose of factor `mode`.
/// Result is (prod_{j != mode} N_j) x N_mode; row r corresponds to the
/// row-major offset of the non-mode indices.
Mat matricize(const ParafacModel& model, int mode);

/// Materialize the full tensor. Throws if the entry count exceeds
/// DenseTensor::kDenseCapacity.
DenseTensor reconstruct(const ParafacModel& model);

}  // namespace tlr
