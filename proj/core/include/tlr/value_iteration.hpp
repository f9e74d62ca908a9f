#pragma once

#include <vector>

#include "tlr/environments.hpp"
#include "tlr/policies.hpp"
#include "tlr/tensor.hpp"

namespace tlr {

/// Exact solution of a Gridworld MDP, used as the acceptance reference.
struct GridworldOracle {
  Vec values;                      // optimal state values, s = row * cols + col
  std::vector<int> greedy_policy;  // optimal action per state (goal: kUp)
  double optimal_return = 0.0;     // greedy policy's expected return from the
                                   // start cell over the finite horizon
  int iterations = 0;
  double bellman_residual = 0.0;
};

/// Infinite-horizon value iteration on the absorbing-goal MDP to sup-norm
/// tolerance `tol`, then finite-horizon policy evaluation of the greedy
/// policy from the start cell. Throws if VI fails to converge within
/// `max_iterations`.
GridworldOracle value_iteration_oracle(const Gridworld& env, double gamma,
                                       double tol, int horizon,
                                       int max_iterations = 1000000);

/// Expected finite-horizon return from the start cell of a stochastic policy
/// given as a (num_states x 4) row-stochastic matrix, by backward dynamic
/// programming over (state, t). Exact up to floating point.
double evaluate_gridworld_policy(const Gridworld& env, const Mat& action_probs,
                                 int horizon, double gamma = 1.0);

/// Per-state action probabilities of a softmax policy on the gridworld's
/// state grid, as the (num_states x 4) matrix evaluate_gridworld_policy eats.
Mat gridworld_action_probs(const Gridworld& env, const AnyPolicy& policy);

}  // namespace tlr
