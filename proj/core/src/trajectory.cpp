#include "tlr/trajectory.hpp"

#include <atomic>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tlr/environments.hpp"

namespace tlr {

double Episode::total_reward() const {
  double sum = 0.0;
  for (const auto& tr : steps) sum += tr.reward;
  return sum;
}

int TrajectoryBatch::total_steps() const {
  int n = 0;
  for (const auto& ep : episodes) n += ep.length();
  return n;
}

bool TrajectoryBatch::has_returns() const {
  for (const auto& ep : episodes) {
    if (static_cast<int>(ep.returns.size()) != ep.length()) return false;
  }
  return true;
}

std::vector<double> TrajectoryBatch::episode_returns() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& ep : episodes) {
    if (ep.returns.empty() && ep.length() > 0) {
      throw std::invalid_argument("episode_returns: returns not computed");
    }
    out.push_back(ep.returns.empty() ? 0.0 : ep.returns.front());
  }
  return out;
}

namespace {

Episode rollout(const Environment& env, const AnyPolicy& policy, int horizon,
                Rng rng) {
  Episode ep;
  ep.steps.reserve(horizon);
  Vec state = env.reset(rng);
  for (int t = 0; t < horizon; ++t) {
    Transition tr;
    tr.raw_state = state;
    tr.state_idx = env.discretize(state);
    tr.action = policy_sample(policy, tr.state_idx, rng);
    tr.log_prob_behavior = policy_log_prob(policy, tr.state_idx, tr.action);
    StepResult step = env.step(state, tr.action, t, rng);
    tr.reward = step.reward;
    ep.steps.push_back(std::move(tr));
    state = std::move(step.next_state);
    if (step.done) break;
  }
  return ep;
}

}  // namespace

TrajectoryBatch sample_batch(const Environment& env, const AnyPolicy& policy,
                             int num_episodes, int horizon, std::uint64_t seed,
                             std::uint64_t iteration, int num_threads) {
  if (num_episodes < 1 || horizon < 1) {
    throw std::invalid_argument("sample_batch: need num_episodes, horizon >= 1");
  }
  const bool discrete_env = env.action_space().discrete;
  if (discrete_env != policy_is_discrete(policy)) {
    throw std::invalid_argument(
        "sample_batch: policy family does not match the env action space");
  }

  TrajectoryBatch batch;
  batch.episodes.resize(num_episodes);
  // Each episode gets its own stream derived from (seed, iteration, u), so
  // the batch is identical regardless of the thread count or schedule.
  if (num_threads <= 1) {
    for (int u = 0; u < num_episodes; ++u) {
      batch.episodes[u] = rollout(env, policy, horizon,
                                  make_rng(derive_seed(seed, iteration, u)));
    }
    return batch;
  }
  std::atomic<int> next_u{0};
  auto worker = [&]() {
    for (int u = next_u.fetch_add(1); u < num_episodes; u = next_u.fetch_add(1)) {
      batch.episodes[u] = rollout(env, policy, horizon,
                                  make_rng(derive_seed(seed, iteration, u)));
    }
  };
  std::vector<std::thread> threads;
  const int n = std::min(num_threads, num_episodes);
  threads.reserve(n);
  for (int i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  return batch;
}

void returns_to_go(TrajectoryBatch& batch) {
  for (auto& ep : batch.episodes) {
    ep.returns.assign(ep.steps.size(), 0.0);
    double acc = 0.0;
    for (int t = ep.length() - 1; t >= 0; --t) {
      acc += ep.steps[t].reward;
      ep.returns[t] = acc;
    }
  }
}

}  // namespace tlr
