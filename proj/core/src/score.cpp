#include "tlr/score.hpp"

#include <stdexcept>

namespace tlr {

FactorLayout::FactorLayout(std::vector<int> mode_dims, int rank)
    : mode_dims_(std::move(mode_dims)), rank_(rank) {
  if (rank_ < 1) throw std::invalid_argument("FactorLayout: rank must be >= 1");
  offsets_.reserve(mode_dims_.size());
  int offset = 0;
  for (int n : mode_dims_) {
    if (n < 1) throw std::invalid_argument("FactorLayout: mode sizes must be >= 1");
    offsets_.push_back(offset);
    offset += n * rank_;
  }
  total_ = offset;
}

Vec FactorLayout::flatten(const ParafacModel& model) const {
  if (model.rank() != rank_ || model.shape().dims() != mode_dims_) {
    throw std::invalid_argument("flatten: model does not match layout");
  }
  Vec out(total_);
  for (int d = 0; d < num_modes(); ++d) {
    const Mat& f = model.factor(d);
    int pos = mode_offset(d);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) out[pos++] = f(i, k);
    }
  }
  return out;
}

std::vector<Mat> FactorLayout::unflatten(const Vec& flat) const {
  if (static_cast<int>(flat.size()) != total_) {
    throw std::invalid_argument("unflatten: length does not match layout");
  }
  std::vector<Mat> factors;
  factors.reserve(mode_dims_.size());
  for (int d = 0; d < num_modes(); ++d) {
    Mat f(mode_dim(d), rank_);
    int pos = mode_offset(d);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) f(i, k) = flat[pos++];
    }
    factors.push_back(std::move(f));
  }
  return factors;
}

Vec ScoreVector::densify() const {
  Vec out = Vec::Zero(layout_.size());
  add_scaled_to(out, 1.0);
  return out;
}

void ScoreVector::add_scaled_to(Vec& out, double scale) const {
  for (const Entry& e : entries_) {
    out[layout_.flat_index(e.mode, e.row, e.col)] += scale * e.value;
  }
}

double ScoreVector::dot(const Vec& dense) const {
  double s = 0.0;
  for (const Entry& e : entries_) {
    s += e.value * dense[layout_.flat_index(e.mode, e.row, e.col)];
  }
  return s;
}

}  // namespace tlr
