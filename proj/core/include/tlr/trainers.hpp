#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "tlr/critic.hpp"
#include "tlr/environments.hpp"
#include "tlr/policies.hpp"
#include "tlr/trajectory.hpp"

namespace tlr {

enum class Algorithm { TLRPG, TLRAC, TRTLRPO, PTLRPO };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct TrainerConfig {
  Algorithm algorithm = Algorithm::TLRPG;
  int rank = 2;         // K, actor
  int critic_rank = 0;  // K'; 0 means "same as rank"

  double eta = 0.05;  // actor step size
  // "constant": eta every iteration; "inv_sqrt_H": eta / sqrt(H) every
  // iteration (the step the stationarity bound assumes).
  std::string eta_schedule = "constant";
  double alpha = 0.01;  // critic step size

  int num_trajectories = 8;  // U
  int horizon = 50;          // T
  int iterations = 200;      // H

  double delta = 0.01;    // trust-region radius (TRTLRPO)
  double epsilon = 0.2;   // clip range (PTLRPO)
  int ppo_epochs = 1;     // inner proximal ascent steps per batch
  int cg_iters = 10;
  double cg_damping = 0.1;

  double sigma = 0.5;        // Gaussian std
  double sigma_decay = 1.0;  // multiplicative per iteration
  double beta = 1.0;         // softmax temperature
  double beta_growth = 1.0;  // multiplicative per iteration

  // Projection box: every factor entry clamped to [-B, B] after each update.
  // Infinity disables.
  double bound = std::numeric_limits<double>::infinity();
  double moreau_lambda = 1.0;  // step used in the gradient-mapping diagnostic

  bool advantage_norm = false;     // zero-mean/unit-var advantages per batch
  double critic_init_scale = 1.0;  // 0 pins the critic at the zero model
  int rollout_threads = 1;
  std::uint64_t seed = 0;

  /// Called after every completed iteration with the updated models
  /// (harness checkpointing plumbing; not serialized).
  std::function<void(int, const AnyPolicy&, const CriticModel&)> iteration_hook;

  /// Throws std::invalid_argument on out-of-range fields. eta = 0 is legal
  /// (a frozen policy is a meaningful baseline).
  void validate() const;
};

struct IterationStats {
  int iteration = 0;
  double mean_return = 0.0;
  double median_return = 0.0;
  double kl_used = 0.0;  // trust-region only; 0 elsewhere
  double grad_mapping_norm = 0.0;
  double wallclock_ms = 0.0;
  // Trust-region diagnostics (not serialized to CSV): whether the line
  // search accepted a step this iteration and the quadratic constraint
  // value Delta^T H Delta it consumed.
  bool tr_accepted = false;
  double tr_constraint_value = 0.0;
};

struct TrainingLog {
  std::string run_id;
  std::string algorithm;
  std::string env;
  std::uint64_t seed = 0;
  std::vector<IterationStats> iterations;
  /// Every episode's total return, in sampling order across iterations.
  std::vector<double> episode_returns;
  bool aborted = false;  // non-finite update: training stopped early

  static std::string csv_header();
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
};

struct TrainResult {
  AnyPolicy policy;
  CriticModel critic;
  TrainingLog log;
};

/// REINFORCE estimator: (1/U) sum_u sum_t G_t^u * score(S_t^u, A_t^u).
Vec pg_gradient(const AnyPolicy& policy, const TrajectoryBatch& batch);

/// Advantage-weighted estimator: (1/U) sum_u sum_t w[u][t] * score. Shared
/// by the actor-critic and trust-region gradients (ratios are 1 at the
/// sampling policy).
Vec advantage_weighted_gradient(const AnyPolicy& policy,
                                const TrajectoryBatch& batch,
                                const std::vector<std::vector<double>>& weights);

/// Entrywise clamp to [-B, B] (Euclidean projection onto the inf-norm box).
Vec project_box(const Vec& params, double bound);

/// Moreau-envelope stationarity proxy: || (theta - P(theta + lambda g)) / lambda ||.
/// Equals ||g|| whenever the step stays inside the box.
double gradient_mapping_norm(const Vec& params, const Vec& grad, double lambda,
                             double bound);

/// Damped Fisher-vector product without materializing the matrix:
/// (1/(U*T)) sum_u sum_t score (score . v) + damping * v, with T the nominal
/// horizon (realized episode lengths may be shorter).
Vec fim_vector_product(const AnyPolicy& policy, const TrajectoryBatch& batch,
                       const Vec& v, double damping, int horizon);

/// Plain conjugate gradient for s.p.d. systems, zero initial guess.
Vec conjugate_gradient(const std::function<Vec(const Vec&)>& matvec,
                       const Vec& b, int iters);

struct TrpoStepResult {
  AnyPolicy policy;
  bool accepted = false;
  double kl_used = 0.0;          // mean sampled-state KL of the taken step
  double constraint_value = 0.0; // Delta^T H Delta of the taken step
  int backtracks = 0;
};

/// CG-solve H x = g, scale to the trust boundary, then backtrack (factor
/// 0.5, at most 10 shrinks) until the surrogate improves and the mean
/// sampled-state KL is within delta. Returns the old policy unchanged if no
/// candidate qualifies or the curvature is not positive.
TrpoStepResult trpo_step(const AnyPolicy& policy_old,
                         const TrajectoryBatch& batch,
                         const std::vector<std::vector<double>>& advantages,
                         const Vec& g, double delta, int cg_iters,
                         double damping, int horizon);

/// The three-case clamp of the probability ratio.
double ppo_clip(double q, double epsilon);

/// Masked clipped-surrogate gradient:
/// (1/U) sum_u sum_t I * q * score_theta * A, with I = 0 iff
/// (q <= 1-eps and A <= 0) or (q >= 1+eps and A >= 0); q is the ratio of the
/// current policy to the recorded behavior log-probs.
Vec ppo_gradient(const AnyPolicy& policy, const TrajectoryBatch& batch,
                 const std::vector<std::vector<double>>& advantages,
                 double epsilon);

/// Builds the family-appropriate random-init policy for an environment:
/// softmax over the discrete action set, Gaussian for continuous actions.
AnyPolicy make_initial_policy(const Environment& env, const TrainerConfig& config);

TrainResult tlrpg_train(const Environment& env, const TrainerConfig& config);
TrainResult tlrac_train(const Environment& env, const TrainerConfig& config);
TrainResult trtlrpo_train(const Environment& env, const TrainerConfig& config);
TrainResult ptlrpo_train(const Environment& env, const TrainerConfig& config);

/// Dispatch on config.algorithm.
TrainResult train(const Environment& env, const TrainerConfig& config);

}  // namespace tlr
