#pragma once

#include "tlr/score.hpp"
#include "tlr/tensor.hpp"
#include "tlr/trajectory.hpp"

namespace tlr {

/// Low-rank value-function approximator: V(s) is one entry of a rank-K'
/// PARAFAC tensor over the state modes.
struct CriticModel {
  ParafacModel vf;

  CriticModel() : vf(ParafacModel::constant(TensorShape({1}), 1, 0.0)) {}
  explicit CriticModel(ParafacModel model) : vf(std::move(model)) {}

  double value_at(const MultiIndex& state_idx) const { return vf.entry(state_idx); }
  FactorLayout layout() const { return FactorLayout(vf.shape().dims(), vf.rank()); }
};

/// Quadratic fit error: L = 1/2 sum_u sum_t (G_t^u - V(S_t^u))^2.
/// An empty batch yields 0.
double critic_loss(const CriticModel& critic, const TrajectoryBatch& batch);

/// Residual-times-basis direction: for each visited state, the per-factor
/// entries (G - V(s)) * prod_{j != d} V_j(i_j, k). This equals -grad L, so
/// stepping ALONG it decreases the loss.
Vec descent_direction(const CriticModel& critic, const TrajectoryBatch& batch);

/// One SGD step: factors += alpha * descent_direction. Throws if the update
/// produces non-finite parameters.
CriticModel critic_step(const CriticModel& critic, const TrajectoryBatch& batch,
                        double alpha);

/// Advantages A_t^u = G_t^u - V(S_t^u), critic held fixed. Shape mirrors the
/// batch: one vector per episode.
std::vector<std::vector<double>> advantages(const TrajectoryBatch& batch,
                                            const CriticModel& critic);

}  // namespace tlr
