#include "tlr/value_iteration.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tlr {
namespace {

struct Outcome {
  int next_state;
  double prob;
  double reward;
  bool terminal;
};

// Slip model: the intended action happens with probability 1 - slip; with
// probability slip a uniformly random action (possibly the intended one)
// happens instead.
std::vector<Outcome> outcomes(const Gridworld& env, int r, int c, int action) {
  std::vector<Outcome> out;
  const double slip = env.slip_prob();
  for (int e = 0; e < 4; ++e) {
    double p = slip / 4.0;
    if (e == action) p += 1.0 - slip;
    if (p == 0.0) continue;
    auto [nr, nc] = env.move(r, c, e);
    const bool at_goal = (nr == env.goal_row() && nc == env.goal_col());
    out.push_back({nr * env.cols() + nc, p,
                   env.step_reward() + (at_goal ? env.goal_reward() : 0.0),
                   at_goal});
  }
  return out;
}

}  // namespace

GridworldOracle value_iteration_oracle(const Gridworld& env, double gamma,
                                       double tol, int horizon,
                                       int max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be > 0");
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("value_iteration: gamma must be in [0, 1]");
  }
  const int num_states = env.rows() * env.cols();
  const int goal_state = env.goal_row() * env.cols() + env.goal_col();

  GridworldOracle oracle;
  oracle.values = Vec::Zero(num_states);
  oracle.greedy_policy.assign(num_states, Gridworld::kUp);

  Vec next_values = Vec::Zero(num_states);
  double delta = 0.0;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    delta = 0.0;
    for (int s = 0; s < num_states; ++s) {
      if (s == goal_state) {
        next_values[s] = 0.0;  // absorbing
        continue;
      }
      const int r = s / env.cols();
      const int c = s % env.cols();
      double best = -std::numeric_limits<double>::infinity();
      int best_action = Gridworld::kUp;
      for (int a = 0; a < 4; ++a) {
        double q = 0.0;
        for (const auto& o : outcomes(env, r, c, a)) {
          q += o.prob *
               (o.reward + (o.terminal ? 0.0 : gamma * oracle.values[o.next_state]));
        }
        if (q > best) {
          best = q;
          best_action = a;
        }
      }
      next_values[s] = best;
      oracle.greedy_policy[s] = best_action;
      delta = std::max(delta, std::abs(best - oracle.values[s]));
    }
    std::swap(oracle.values, next_values);
    if (delta < tol) break;
  }
  if (delta >= tol) {
    throw std::runtime_error("value_iteration: no convergence within iteration cap");
  }
  oracle.iterations = iter + 1;
  oracle.bellman_residual = delta;

  // Finite-horizon value of the greedy policy, for comparing against
  // episodic training runs with the same horizon.
  Mat greedy_probs = Mat::Zero(num_states, 4);
  for (int s = 0; s < num_states; ++s) greedy_probs(s, oracle.greedy_policy[s]) = 1.0;
  oracle.optimal_return = evaluate_gridworld_policy(env, greedy_probs, horizon, gamma);
  return oracle;
}

double evaluate_gridworld_policy(const Gridworld& env, const Mat& action_probs,
                                 int horizon, double gamma) {
  const int num_states = env.rows() * env.cols();
  if (action_probs.rows() != num_states || action_probs.cols() != 4) {
    throw std::invalid_argument("evaluate_gridworld_policy: need a states x 4 matrix");
  }
  const int goal_state = env.goal_row() * env.cols() + env.goal_col();

  // value[s] = expected return-to-go with `steps_left` steps remaining.
  Vec value = Vec::Zero(num_states);
  Vec next = Vec::Zero(num_states);
  for (int steps_left = 1; steps_left <= horizon; ++steps_left) {
    for (int s = 0; s < num_states; ++s) {
      if (s == goal_state) {
        next[s] = 0.0;
        continue;
      }
      const int r = s / env.cols();
      const int c = s % env.cols();
      double v = 0.0;
      for (int a = 0; a < 4; ++a) {
        const double pa = action_probs(s, a);
        if (pa == 0.0) continue;
        for (const auto& o : outcomes(env, r, c, a)) {
          v += pa * o.prob *
               (o.reward + (o.terminal ? 0.0 : gamma * value[o.next_state]));
        }
      }
      next[s] = v;
    }
    std::swap(value, next);
  }
  return value[0];  // start cell (0,0) is state 0
}

Mat gridworld_action_probs(const Gridworld& env, const AnyPolicy& policy) {
  const auto& softmax = std::get<SoftmaxPolicy>(policy);
  if (softmax.num_actions() != 4 || softmax.action_dim() != 1) {
    throw std::invalid_argument("gridworld_action_probs: policy shape mismatch");
  }
  const int num_states = env.rows() * env.cols();
  Mat probs(num_states, 4);
  for (int s = 0; s < num_states; ++s) {
    const MultiIndex idx = {s / env.cols(), s % env.cols()};
    probs.row(s) = softmax.probs(idx).transpose();
  }
  return probs;
}

}  // namespace tlr
