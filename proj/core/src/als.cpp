#include "tlr/als.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "tlr/rng.hpp"

namespace tlr {

double nfe(const DenseTensor& x, const DenseTensor& xhat) {
  if (!(x.shape() == xhat.shape())) throw std::invalid_argument("nfe: shape mismatch");
  double num = 0.0, den = 0.0;
  const auto& xd = x.data();
  const auto& hd = xhat.data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double r = xd[i] - hd[i];
    num += r * r;
    den += xd[i] * xd[i];
  }
  if (den == 0.0) {
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::sqrt(num / den);
}

namespace {

/// Matricized tensor times Khatri-Rao product for `mode`: the N_mode x K
/// matrix M with M(i, k) = sum over entries with i_mode = i of
/// value * prod_{j != mode} factors[j](i_j, k).
Mat mttkrp(const DenseTensor& target, const std::vector<Mat>& factors, int mode) {
  const TensorShape& shape = target.shape();
  const int num_modes = shape.num_modes();
  const int rank = static_cast<int>(factors[0].cols());
  Mat out = Mat::Zero(shape.dim(mode), rank);
  MultiIndex idx(static_cast<std::size_t>(num_modes), 0);
  Vec prod(rank);
  const auto& data = target.data();
  for (std::size_t flat = 0; flat < data.size(); ++flat) {
    const double v = data[flat];
    if (v != 0.0) {
      prod.setConstant(v);
      for (int j = 0; j < num_modes; ++j) {
        if (j == mode) continue;
        prod.array() *= factors[static_cast<std::size_t>(j)]
                            .row(idx[static_cast<std::size_t>(j)])
                            .transpose()
                            .array();
      }
      out.row(idx[static_cast<std::size_t>(mode)]) += prod.transpose();
    }
    for (int d = num_modes - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < shape.dim(d)) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return out;
}

struct SweepState {
  std::vector<Mat> factors;
  std::vector<Mat> grams;  // factor^T factor per mode
};

/// ||model||_F^2 via the Hadamard product of the Gram matrices.
double model_sq_norm(const SweepState& s) {
  const int rank = static_cast<int>(s.grams[0].rows());
  Mat had = Mat::Ones(rank, rank);
  for (const Mat& g : s.grams) had.array() *= g.array();
  return had.sum();
}

}  // namespace

AlsResult als_fit(const DenseTensor& target, int rank, const AlsOptions& options) {
  if (rank < 1) throw std::invalid_argument("als_fit: rank must be >= 1");
  if (target.size() == 0) throw std::invalid_argument("als_fit: empty tensor");
  const TensorShape& shape = target.shape();
  const int num_modes = shape.num_modes();
  const double target_norm = target.frobenius_norm();
  const double target_sq = target_norm * target_norm;

  AlsResult best;
  best.final_nfe = std::numeric_limits<double>::infinity();

  const bool warm = options.init != nullptr;
  if (warm && (!(options.init->shape() == shape) || options.init->rank() != rank)) {
    throw std::invalid_argument("als_fit: warm-start model shape/rank mismatch");
  }

  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Rng rng(derive_seed(options.seed, 0x415353, static_cast<std::uint64_t>(restart)));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    SweepState s;
    s.factors.reserve(static_cast<std::size_t>(num_modes));
    s.grams.resize(static_cast<std::size_t>(num_modes));
    for (int d = 0; d < num_modes; ++d) {
      Mat f(shape.dim(d), rank);
      if (warm && restart == 0) {
        f = options.init->factor(d);
      } else {
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
          for (Eigen::Index k = 0; k < f.cols(); ++k) f(i, k) = unif(rng);
        }
      }
      s.factors.push_back(std::move(f));
      s.grams[static_cast<std::size_t>(d)] =
          s.factors.back().transpose() * s.factors.back();
    }

    double prev_nfe = std::numeric_limits<double>::infinity();
    double cur_nfe = prev_nfe;
    int iters = 0;
    for (int it = 0; it < options.max_iters; ++it) {
      double inner = 0.0;  // <target, model>, from the last mode's MTTKRP
      for (int mode = 0; mode < num_modes; ++mode) {
        Mat gram_others = Mat::Ones(rank, rank);
        for (int j = 0; j < num_modes; ++j) {
          if (j != mode) gram_others.array() *= s.grams[static_cast<std::size_t>(j)].array();
        }
        double ridge = 1e-9 * gram_others.trace();
        if (!(ridge > 0.0)) ridge = 1e-12;
        gram_others.diagonal().array() += ridge;

        const Mat m = mttkrp(target, s.factors, mode);
        // Solves factor * gram_others = m for the new factor.
        s.factors[static_cast<std::size_t>(mode)] =
            gram_others.ldlt().solve(m.transpose()).transpose();
        s.grams[static_cast<std::size_t>(mode)] =
            s.factors[static_cast<std::size_t>(mode)].transpose() *
            s.factors[static_cast<std::size_t>(mode)];
        if (mode == num_modes - 1) {
          inner = (m.array() * s.factors[static_cast<std::size_t>(mode)].array()).sum();
        }
      }
      iters = it + 1;
      const double resid_sq = std::max(0.0, target_sq - 2.0 * inner + model_sq_norm(s));
      cur_nfe = target_sq == 0.0 ? 0.0 : std::sqrt(resid_sq / target_sq);
      if (std::isfinite(prev_nfe) && prev_nfe - cur_nfe < options.tol * std::max(prev_nfe, 1e-15)) {
        break;
      }
      prev_nfe = cur_nfe;
    }

    if (cur_nfe < best.final_nfe || restart == 0) {
      bool finite = true;
      for (const Mat& f : s.factors) finite = finite && f.allFinite();
      if (finite) {
        best.model = ParafacModel(shape, rank, s.factors);
        best.final_nfe = target_norm == 0.0 ? 0.0 : cur_nfe;
        best.iterations = iters;
        best.best_restart = restart;
      }
    }
  }

  if (best.model.rank() == 0) throw std::runtime_error("als_fit: every restart diverged");
  return best;
}

}  // namespace tlr
