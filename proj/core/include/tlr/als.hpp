#pragma once

#include <cstdint>

#include "tlr/tensor.hpp"

namespace tlr {

struct AlsOptions {
  int max_iters = 200;
  /// Stop when the relative NFE improvement of a full sweep drops below this.
  double tol = 1e-8;
  int restarts = 1;
  std::uint64_t seed = 0;
  /// Optional warm start: restart 0 begins from this model instead of a
  /// random draw (must match the target shape and requested rank).
  const ParafacModel* init = nullptr;
};

struct AlsResult {
  ParafacModel model;
  double final_nfe = 0.0;
  int iterations = 0;
  int best_restart = 0;
};

/// Normalized Frobenius error ||x - xhat||_F / ||x||_F. When ||x||_F == 0 the
/// result is 0 if xhat is also zero and +infinity otherwise.
double nfe(const DenseTensor& x, const DenseTensor& xhat);

/// Alternating least squares fit of a rank-`rank` model to `target`.
/// Each mode update solves the normal equations of the matricized
/// least-squares problem with the other factors fixed, with a small
/// trace-scaled ridge term since Khatri-Rao Gram matrices can be
/// rank-deficient. Factors start i.i.d. uniform on [-1, 1]; restart r uses a
/// seed derived from (seed, r), and the best restart by NFE wins.
AlsResult als_fit(const DenseTensor& target, int rank, const AlsOptions& options = {});

}  // namespace tlr
