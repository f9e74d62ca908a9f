#include "tlr/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tlr {

TensorShape::TensorShape(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("TensorShape: need at least one mode");
  for (int n : dims_) {
    if (n < 1) throw std::invalid_argument("TensorShape: every mode size must be >= 1");
  }
}

std::int64_t TensorShape::num_entries() const {
  std::int64_t n = 1;
  for (int d : dims_) n *= d;
  return n;
}

std::int64_t TensorShape::flat_index(const MultiIndex& idx) const {
  check_index(idx);
  std::int64_t flat = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    flat = flat * dims_[d] + idx[d];
  }
  return flat;
}

bool TensorShape::contains(const MultiIndex& idx) const {
  if (idx.size() != dims_.size()) return false;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (idx[d] < 0 || idx[d] >= dims_[d]) return false;
  }
  return true;
}

void TensorShape::check_index(const MultiIndex& idx) const {
  if (!contains(idx)) {
    std::ostringstream os;
    os << "index [";
    for (std::size_t d = 0; d < idx.size(); ++d) os << (d ? "," : "") << idx[d];
    os << "] out of range for shape " << to_string();
    throw std::out_of_range(os.str());
  }
}

std::string TensorShape::to_string() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t d = 0; d < dims_.size(); ++d) os << (d ? "," : "") << dims_[d];
  os << "]";
  return os.str();
}

DenseTensor::DenseTensor(TensorShape shape) : shape_(std::move(shape)) {
  const std::int64_t n = shape_.num_entries();
  if (n > kDenseCapacity) {
    throw std::length_error("DenseTensor: " + std::to_string(n) +
                            " entries exceed the dense materialization cap");
  }
  data_.assign(static_cast<std::size_t>(n), 0.0);
}

DenseTensor::DenseTensor(TensorShape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != shape_.num_entries()) {
    throw std::invalid_argument("DenseTensor: data length does not match shape");
  }
  if (shape_.num_entries() > kDenseCapacity) {
    throw std::length_error("DenseTensor: entry count exceeds the dense materialization cap");
  }
}

double DenseTensor::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

ParafacModel::ParafacModel(TensorShape shape, int rank, std::vector<Mat> factors)
    : shape_(std::move(shape)), rank_(rank), factors_(std::move(factors)) {
  if (rank_ < 1) throw std::invalid_argument("ParafacModel: rank must be >= 1");
  if (static_cast<int>(factors_.size()) != shape_.num_modes()) {
    throw std::invalid_argument("ParafacModel: need one factor matrix per mode");
  }
  for (int d = 0; d < shape_.num_modes(); ++d) {
    const Mat& f = factors_[static_cast<std::size_t>(d)];
    if (f.rows() != shape_.dim(d) || f.cols() != rank_) {
      throw std::invalid_argument("ParafacModel: factor " + std::to_string(d) +
                                  " must be " + std::to_string(shape_.dim(d)) + "x" +
                                  std::to_string(rank_));
    }
  }
  if (!is_finite()) throw std::invalid_argument("ParafacModel: factors contain non-finite entries");
}

ParafacModel ParafacModel::constant(const TensorShape& shape, int rank, double value) {
  std::vector<Mat> factors;
  factors.reserve(static_cast<std::size_t>(shape.num_modes()));
  for (int d = 0; d < shape.num_modes(); ++d) {
    factors.push_back(Mat::Constant(shape.dim(d), rank, value));
  }
  return ParafacModel(shape, rank, std::move(factors));
}

double ParafacModel::entry(const MultiIndex& idx) const {
  shape_.check_index(idx);
  double sum = 0.0;
  for (int k = 0; k < rank_; ++k) {
    double prod = 1.0;
    for (int d = 0; d < num_modes(); ++d) {
      prod *= factors_[static_cast<std::size_t>(d)](idx[static_cast<std::size_t>(d)], k);
    }
    sum += prod;
  }
  return sum;
}

Vec ParafacModel::fiber_last_mode(const MultiIndex& prefix) const {
  const int d_last = num_modes() - 1;
  if (static_cast<int>(prefix.size()) != d_last) {
    throw std::out_of_range("fiber_last_mode: prefix must cover all modes but the last");
  }
  Vec partial = Vec::Ones(rank_);
  for (int d = 0; d < d_last; ++d) {
    const int i = prefix[static_cast<std::size_t>(d)];
    if (i < 0 || i >= shape_.dim(d)) {
      throw std::out_of_range("fiber_last_mode: prefix index out of range in mode " +
                              std::to_string(d));
    }
    partial.array() *= factors_[static_cast<std::size_t>(d)].row(i).transpose().array();
  }
  return factors_[static_cast<std::size_t>(d_last)] * partial;
}

bool ParafacModel::is_finite() const {
  for (const Mat& f : factors_) {
    if (!f.allFinite()) return false;
  }
  return true;
}

Mat khatri_rao(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("khatri_rao: column counts must match");
  }
  Mat out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), k, b.rows(), 1) = a(i, k) * b.col(k);
    }
  }
  return out;
}

Mat matricize(const ParafacModel& model, int mode) {
  const int num_modes = model.num_modes();
  if (mode < 0 || mode >= num_modes) throw std::out_of_range("matricize: mode out of range");
  Mat kr;
  bool first = true;
  for (int d = 0; d < num_modes; ++d) {
    if (d == mode) continue;
    kr = first ? model.factor(d) : khatri_rao(kr, model.factor(d));
    first = false;
  }
  if (first) {
    // Single-mode tensor: the co-factor product is the 1x1 identity row.
    kr = Mat::Ones(1, model.rank());
  }
  return kr * model.factor(mode).transpose();
}

DenseTensor reconstruct(const ParafacModel& model) {
  const TensorShape& shape = model.shape();
  if (shape.num_entries() > DenseTensor::kDenseCapacity) {
    throw std::length_error("reconstruct: tensor exceeds the dense materialization cap");
  }
  DenseTensor out(shape);
  const int num_modes = shape.num_modes();
  MultiIndex idx(static_cast<std::size_t>(num_modes), 0);
  std::vector<double>& data = out.data();
  for (std::size_t flat = 0; flat < data.size(); ++flat) {
    data[flat] = model.entry(idx);
    for (int d = num_modes - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < shape.dim(d)) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return out;
}

}  // namespace tlr
