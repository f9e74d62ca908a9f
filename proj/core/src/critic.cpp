#include "tlr/critic.hpp"

#include <cmath>
#include <stdexcept>

namespace tlr {
namespace {

// The gradient of V(s) w.r.t. the factors has the same sparse structure as a
// policy score: one touched row per mode, value prod_{j != d} V_j(i_j, k).
ScoreVector value_gradient(const ParafacModel& vf, const MultiIndex& idx) {
  const int num_modes = vf.num_modes();
  const int rank = vf.rank();
  Mat prefix = Mat::Ones(num_modes + 1, rank);
  for (int d = 0; d < num_modes; ++d) {
    prefix.row(d + 1) = prefix.row(d).cwiseProduct(vf.factor(d).row(idx[d]));
  }
  Mat suffix = Mat::Ones(num_modes + 1, rank);
  for (int d = num_modes - 1; d >= 0; --d) {
    suffix.row(d) = vf.factor(d).row(idx[d]).cwiseProduct(suffix.row(d + 1));
  }
  ScoreVector sv(FactorLayout(vf.shape().dims(), vf.rank()));
  for (int d = 0; d < num_modes; ++d) {
    for (int k = 0; k < rank; ++k) {
      sv.add(d, idx[d], k, prefix(d, k) * suffix(d + 1, k));
    }
  }
  return sv;
}

}  // namespace

double critic_loss(const CriticModel& critic, const TrajectoryBatch& batch) {
  double loss = 0.0;
  for (const auto& ep : batch.episodes) {
    for (int t = 0; t < ep.length(); ++t) {
      const double resid = ep.returns[t] - critic.value_at(ep.steps[t].state_idx);
      loss += 0.5 * resid * resid;
    }
  }
  return loss;
}

Vec descent_direction(const CriticModel& critic, const TrajectoryBatch& batch) {
  const FactorLayout layout = critic.layout();
  Vec dir = Vec::Zero(layout.size());
  for (const auto& ep : batch.episodes) {
    if (static_cast<int>(ep.returns.size()) != ep.length()) {
      throw std::invalid_argument("descent_direction: batch lacks returns");
    }
    for (int t = 0; t < ep.length(); ++t) {
      const double resid = ep.returns[t] - critic.value_at(ep.steps[t].state_idx);
      value_gradient(critic.vf, ep.steps[t].state_idx).add_scaled_to(dir, resid);
    }
  }
  return dir;
}

CriticModel critic_step(const CriticModel& critic, const TrajectoryBatch& batch,
                        double alpha) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("critic_step: alpha must be positive");
  }
  const FactorLayout layout = critic.layout();
  Vec flat = layout.flatten(critic.vf);
  flat += alpha * descent_direction(critic, batch);
  if (!flat.allFinite()) {
    throw std::runtime_error("critic_step: update produced non-finite parameters");
  }
  return CriticModel(
      ParafacModel(critic.vf.shape(), critic.vf.rank(), layout.unflatten(flat)));
}

std::vector<std::vector<double>> advantages(const TrajectoryBatch& batch,
                                            const CriticModel& critic) {
  std::vector<std::vector<double>> adv(batch.episodes.size());
  for (std::size_t u = 0; u < batch.episodes.size(); ++u) {
    const auto& ep = batch.episodes[u];
    if (static_cast<int>(ep.returns.size()) != ep.length()) {
      throw std::invalid_argument("advantages: batch lacks returns");
    }
    adv[u].resize(ep.length());
    for (int t = 0; t < ep.length(); ++t) {
      adv[u][t] = ep.returns[t] - critic.value_at(ep.steps[t].state_idx);
    }
  }
  return adv;
}

}  // namespace tlr
