#pragma once

#include <cstdint>
#include <vector>

#include "tlr/policies.hpp"
#include "tlr/rng.hpp"
#include "tlr/tensor.hpp"

namespace tlr {

class Environment;

/// One (s, a, r) step as stored during sampling. The behavior log-prob is
/// recorded at sampling time so importance ratios can be formed later even
/// after the policy moves.
struct Transition {
  MultiIndex state_idx;
  Vec raw_state;
  Action action;
  double reward = 0.0;
  double log_prob_behavior = 0.0;
};

struct Episode {
  std::vector<Transition> steps;
  /// Returns-to-go G_t = sum_{t' >= t} r_{t'}; empty until returns_to_go().
  std::vector<double> returns;

  int length() const { return static_cast<int>(steps.size()); }
  double total_reward() const;
};

/// U episodes collected under one policy snapshot.
struct TrajectoryBatch {
  std::vector<Episode> episodes;

  int num_episodes() const { return static_cast<int>(episodes.size()); }
  int total_steps() const;
  bool has_returns() const;
  /// Episode totals G_0^u, one per episode (requires returns).
  std::vector<double> episode_returns() const;
};

/// Roll out U episodes of at most T steps each. Episodes end early when the
/// environment reports done. Each episode u draws from its own RNG stream
/// derived from (seed, iteration, u), so results are identical no matter how
/// rollouts are scheduled across threads.
TrajectoryBatch sample_batch(const Environment& env, const AnyPolicy& policy,
                             int num_episodes, int horizon,
                             std::uint64_t seed, std::uint64_t iteration = 0,
                             int num_threads = 1);

/// Fill returns by backward accumulation: G_t = r_t + G_{t+1}, G_T+1 = 0.
void returns_to_go(TrajectoryBatch& batch);

}  // namespace tlr
