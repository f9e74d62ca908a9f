#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tlr/rng.hpp"
#include "tlr/score.hpp"
#include "tlr/tensor.hpp"

namespace tlr {

/// Environment action. Discrete actions hold integer values in `values`
/// (one per action dimension); continuous actions hold real values.
struct Action {
  Vec values;
  bool discrete = false;

  static Action discrete_scalar(int a) {
    Action act;
    act.values = Vec::Constant(1, static_cast<double>(a));
    act.discrete = true;
    return act;
  }
  static Action continuous_scalar(double a) {
    Action act;
    act.values = Vec::Constant(1, a);
    return act;
  }
  int index(int p = 0) const { return static_cast<int>(values[p]); }
};

/// Gaussian policy whose per-state means live in a low-rank tensor over the
/// state modes (plus one extra mode of size P when the action has P > 1
/// dimensions). The standard deviation is a state-independent constant.
class GaussianPolicy {
 public:
  GaussianPolicy(ParafacModel means, double sigma, int action_dim = 1);

  const ParafacModel& means() const { return means_; }
  double sigma() const { return sigma_; }
  int action_dim() const { return action_dim_; }
  int state_modes() const { return state_modes_; }

  /// Mean action(s) at a state index: the tensor entry, or the action-mode
  /// fiber when P > 1.
  Vec mean(const MultiIndex& state_idx) const;

  /// mean + sigma * standard normal, independently per action dimension.
  Action sample(const MultiIndex& state_idx, Rng& rng) const;

  /// Log-density of the (pre-clamp) action, summed over action dimensions.
  double log_prob(const MultiIndex& state_idx, const Action& action) const;

  /// Exact gradient of log_prob w.r.t. every factor entry. At most one row
  /// per state-mode factor is touched, so the sparse size is O(K(D + P)).
  ScoreVector score(const MultiIndex& state_idx, const Action& action) const;

  FactorLayout layout() const;
  GaussianPolicy with_factors(std::vector<Mat> factors) const;
  GaussianPolicy with_sigma(double sigma) const;

 private:
  void check_state(const MultiIndex& state_idx) const;

  ParafacModel means_;
  double sigma_;
  int action_dim_;
  int state_modes_;
};

/// Softmax policy over C discrete actions per action dimension. Logits are a
/// fiber of a low-rank tensor with one trailing action mode of size C (plus a
/// dimension mode of size P when the action has P > 1 dimensions).
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(ParafacModel logits, double temperature, int action_dim = 1);

  const ParafacModel& logits() const { return logits_; }
  double temperature() const { return temperature_; }
  int num_actions() const { return num_actions_; }
  int action_dim() const { return action_dim_; }
  int state_modes() const { return state_modes_; }

  /// Numerically stable softmax of (temperature * logits fiber); sums to 1.
  Vec probs(const MultiIndex& state_idx, int dim = 0) const;

  /// Categorical draw per action dimension.
  Action sample(const MultiIndex& state_idx, Rng& rng) const;

  double log_prob(const MultiIndex& state_idx, const Action& action) const;

  /// Exact gradient of log_prob w.r.t. every factor entry, including the
  /// temperature factor, so it matches finite differences of log_prob for
  /// any temperature. Sparse size O(K(D + C + P)).
  ScoreVector score(const MultiIndex& state_idx, const Action& action) const;

  FactorLayout layout() const;
  SoftmaxPolicy with_factors(std::vector<Mat> factors) const;
  SoftmaxPolicy with_temperature(double temperature) const;

 private:
  void check_state(const MultiIndex& state_idx) const;
  Vec logits_fiber(const MultiIndex& state_idx, int dim) const;

  ParafacModel logits_;
  double temperature_;
  int action_dim_;
  int state_modes_;
  int num_actions_;
};

using AnyPolicy = std::variant<GaussianPolicy, SoftmaxPolicy>;

Action policy_sample(const AnyPolicy& policy, const MultiIndex& state_idx, Rng& rng);
double policy_log_prob(const AnyPolicy& policy, const MultiIndex& state_idx, const Action& action);
ScoreVector policy_score(const AnyPolicy& policy, const MultiIndex& state_idx, const Action& action);
FactorLayout policy_layout(const AnyPolicy& policy);
const ParafacModel& policy_model(const AnyPolicy& policy);
AnyPolicy policy_with_factors(const AnyPolicy& policy, std::vector<Mat> factors);
bool policy_is_discrete(const AnyPolicy& policy);

/// Greedy action: the mean for Gaussian policies, the argmax of the action
/// probabilities for softmax policies (lowest index wins ties). Diagnostics
/// and evaluation only.
Action policy_greedy_action(const AnyPolicy& policy, const MultiIndex& state_idx);

/// KL(old || new) at one state. Closed form for Gaussians, discrete KL of
/// the probability vectors for softmax; sums over action dimensions.
/// Throws if the two policies are not the same family and shape.
double kl_divergence(const AnyPolicy& old_policy, const AnyPolicy& new_policy,
                     const MultiIndex& state_idx);

/// Factor initialization for policies: i.i.d. uniform [0.5, 1.5] scaled by
/// K^(-1/D), so entries are O(1) after the rank-sum of D-mode products and
/// no score starts at the all-zero stationary point.
ParafacModel random_policy_model(const TensorShape& shape, int rank, Rng& rng);

/// Factor initialization for critics: i.i.d. uniform [-0.5, 0.5] scaled by
/// K^(-1/D) (times `scale`; 0 gives an identically-zero model).
ParafacModel random_critic_model(const TensorShape& shape, int rank, Rng& rng,
                                 double scale = 1.0);

/// Checkpoint container: JSON header (family, dims, rank, sigma/beta, ...)
/// followed by the factor matrices as little-endian doubles. Round-trips
/// bit-exactly.
void save_policy_checkpoint(const AnyPolicy& policy, const std::string& path);
AnyPolicy load_policy_checkpoint(const std::string& path);
void save_critic_checkpoint(const ParafacModel& vf, const std::string& path);
ParafacModel load_critic_checkpoint(const std::string& path);

}  // namespace tlr
