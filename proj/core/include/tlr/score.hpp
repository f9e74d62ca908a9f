#pragma once

#include <vector>

#include "tlr/tensor.hpp"

namespace tlr {

/// Canonical flat ordering of all factor entries of a PARAFAC model:
/// mode-major, row-major within a factor, column (rank) index fastest.
/// FIM/CG code and checkpoints rely on this layout being stable.
class FactorLayout {
 public:
  FactorLayout() = default;
  FactorLayout(std::vector<int> mode_dims, int rank);

  int num_modes() const { return static_cast<int>(mode_dims_.size()); }
  int mode_dim(int d) const { return mode_dims_.at(static_cast<std::size_t>(d)); }
  int rank() const { return rank_; }

  /// Flat offset of the first entry of factor d.
  int mode_offset(int d) const { return offsets_.at(static_cast<std::size_t>(d)); }
  int flat_index(int mode, int row, int col) const {
    return mode_offset(mode) + row * rank_ + col;
  }
  /// Total flat length, sum_d N_d * K.
  int size() const { return total_; }

  /// Concatenate a model's factors in canonical order.
  Vec flatten(const ParafacModel& model) const;
  /// Rebuild factor matrices from a flat vector.
  std::vector<Mat> unflatten(const Vec& flat) const;

  bool operator==(const FactorLayout& other) const {
    return rank_ == other.rank_ && mode_dims_ == other.mode_dims_;
  }

 private:
  std::vector<int> mode_dims_;
  int rank_ = 0;
  std::vector<int> offsets_;
  int total_ = 0;
};

/// Sparse gradient of a log-policy (or critic loss) w.r.t. all factor
/// entries. Stores only the nonzero (mode, row, col, value) entries; the
/// dense view follows the canonical FactorLayout order.
class ScoreVector {
 public:
  struct Entry {
    int mode;
    int row;
    int col;
    double value;
  };

  ScoreVector() = default;
  explicit ScoreVector(FactorLayout layout) : layout_(std::move(layout)) {}

  const FactorLayout& layout() const { return layout_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t nonzeros() const { return entries_.size(); }

  void reserve(std::size_t n) { entries_.reserve(n); }
  void add(int mode, int row, int col, double value) {
    entries_.push_back({mode, row, col, value});
  }

  /// Dense view in canonical order, length sum_d N_d * K.
  Vec densify() const;

  /// out += scale * this (dense accumulate).
  void add_scaled_to(Vec& out, double scale) const;

  /// Inner product with a dense vector in canonical order.
  double dot(const Vec& dense) const;

 private:
  FactorLayout layout_;
  std::vector<Entry> entries_;
};

}  // namespace tlr
