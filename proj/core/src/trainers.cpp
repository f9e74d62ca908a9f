#include "tlr/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace tlr {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::TLRPG: return "tlrpg";
    case Algorithm::TLRAC: return "tlrac";
    case Algorithm::TRTLRPO: return "trtlrpo";
    case Algorithm::PTLRPO: return "ptlrpo";
  }
  throw std::invalid_argument("to_string: bad algorithm tag");
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "tlrpg") return Algorithm::TLRPG;
  if (name == "tlrac") return Algorithm::TLRAC;
  if (name == "trtlrpo") return Algorithm::TRTLRPO;
  if (name == "ptlrpo") return Algorithm::PTLRPO;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

void TrainerConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("config: rank must be >= 1");
  if (critic_rank < 0) throw std::invalid_argument("config: critic_rank must be >= 0");
  if (eta < 0) throw std::invalid_argument("config: eta must be >= 0");
  if (eta_schedule != "constant" && eta_schedule != "inv_sqrt_H") {
    throw std::invalid_argument("config: unknown eta_schedule '" + eta_schedule + "'");
  }
  if (alpha < 0) throw std::invalid_argument("config: alpha must be >= 0");
  if (num_trajectories < 1 || horizon < 1 || iterations < 1) {
    throw std::invalid_argument("config: need U, T, H >= 1");
  }
  if (!(delta > 0)) throw std::invalid_argument("config: delta must be > 0");
  if (!(epsilon > 0) || epsilon >= 1) {
    throw std::invalid_argument("config: epsilon must be in (0, 1)");
  }
  if (ppo_epochs < 1) throw std::invalid_argument("config: ppo_epochs must be >= 1");
  if (cg_iters < 1) throw std::invalid_argument("config: cg_iters must be >= 1");
  if (cg_damping < 0) throw std::invalid_argument("config: cg_damping must be >= 0");
  if (!(sigma > 0)) throw std::invalid_argument("config: sigma must be > 0");
  if (sigma_decay <= 0 || beta_growth <= 0) {
    throw std::invalid_argument("config: decay factors must be > 0");
  }
  if (beta < 0) throw std::invalid_argument("config: beta must be >= 0");
  if (!(bound > 0)) throw std::invalid_argument("config: bound must be > 0");
  if (!(moreau_lambda > 0)) throw std::invalid_argument("config: moreau_lambda must be > 0");
  if (critic_init_scale < 0) {
    throw std::invalid_argument("config: critic_init_scale must be >= 0");
  }
  if (rollout_threads < 1) throw std::invalid_argument("config: rollout_threads must be >= 1");
}

std::string TrainingLog::csv_header() {
  return "run_id,algorithm,env,seed,iteration,mean_return,median_return,"
         "kl_used,grad_mapping_norm,wallclock_ms";
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainingLog::write_csv(std::ostream& out) const {
  out << csv_header() << "\n";
  for (const auto& it : iterations) {
    out << run_id << ',' << algorithm << ',' << env << ',' << seed << ','
        << it.iteration << ',' << fmt_double(it.mean_return) << ','
        << fmt_double(it.median_return) << ',' << fmt_double(it.kl_used) << ','
        << fmt_double(it.grad_mapping_norm) << ','
        << fmt_double(it.wallclock_ms) << "\n";
  }
}

void TrainingLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("TrainingLog: cannot open " + path);
  write_csv(out);
}

Vec pg_gradient(const AnyPolicy& policy, const TrajectoryBatch& batch) {
  Vec grad = Vec::Zero(policy_layout(policy).size());
  if (batch.num_episodes() == 0) return grad;
  const double scale = 1.0 / batch.num_episodes();
  for (const auto& ep : batch.episodes) {
    if (static_cast<int>(ep.returns.size()) != ep.length()) {
      throw std::invalid_argument("pg_gradient: batch lacks returns");
    }
    for (int t = 0; t < ep.length(); ++t) {
      if (ep.returns[t] == 0.0) continue;
      policy_score(policy, ep.steps[t].state_idx, ep.steps[t].action)
          .add_scaled_to(grad, scale * ep.returns[t]);
    }
  }
  return grad;
}

Vec advantage_weighted_gradient(const AnyPolicy& policy,
                                const TrajectoryBatch& batch,
                                const std::vector<std::vector<double>>& weights) {
  Vec grad = Vec::Zero(policy_layout(policy).size());
  if (batch.num_episodes() == 0) return grad;
  if (weights.size() != batch.episodes.size()) {
    throw std::invalid_argument("advantage_weighted_gradient: weight shape mismatch");
  }
  const double scale = 1.0 / batch.num_episodes();
  for (std::size_t u = 0; u < batch.episodes.size(); ++u) {
    const auto& ep = batch.episodes[u];
    if (static_cast<int>(weights[u].size()) != ep.length()) {
      throw std::invalid_argument("advantage_weighted_gradient: weight shape mismatch");
    }
    for (int t = 0; t < ep.length(); ++t) {
      if (weights[u][t] == 0.0) continue;
      policy_score(policy, ep.steps[t].state_idx, ep.steps[t].action)
          .add_scaled_to(grad, scale * weights[u][t]);
    }
  }
  return grad;
}

Vec project_box(const Vec& params, double bound) {
  if (std::isinf(bound)) return params;
  return params.cwiseMax(-bound).cwiseMin(bound);
}

double gradient_mapping_norm(const Vec& params, const Vec& grad, double lambda,
                             double bound) {
  if (!(lambda > 0)) throw std::invalid_argument("gradient_mapping_norm: lambda <= 0");
  const Vec stepped = project_box(params + lambda * grad, bound);
  return (params - stepped).norm() / lambda;
}

Vec fim_vector_product(const AnyPolicy& policy, const TrajectoryBatch& batch,
                       const Vec& v, double damping, int horizon) {
  Vec out = damping * v;
  const int num_episodes = batch.num_episodes();
  if (num_episodes == 0) return out;
  const double scale =
      1.0 / (static_cast<double>(num_episodes) * static_cast<double>(horizon));
  for (const auto& ep : batch.episodes) {
    for (const auto& tr : ep.steps) {
      const ScoreVector sv = policy_score(policy, tr.state_idx, tr.action);
      const double inner = sv.dot(v);
      if (inner != 0.0) sv.add_scaled_to(out, scale * inner);
    }
  }
  return out;
}

Vec conjugate_gradient(const std::function<Vec(const Vec&)>& matvec,
                       const Vec& b, int iters) {
  Vec x = Vec::Zero(b.size());
  Vec r = b;  // b - A*0
  Vec p = r;
  double rs = r.squaredNorm();
  if (rs == 0.0) return x;
  for (int i = 0; i < iters; ++i) {
    const Vec ap = matvec(p);
    const double pap = p.dot(ap);
    if (pap <= 0.0 || !std::isfinite(pap)) break;  // lost positive definiteness
    const double alpha = rs / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    if (rs_new < 1e-20) break;
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return x;
}

namespace {

// Importance surrogate (1/U) sum q * A with q against the recorded behavior
// log-probs. At the sampling policy every q is 1.
double clip_surrogate_base(const AnyPolicy& policy, const TrajectoryBatch& batch,
                           const std::vector<std::vector<double>>& advantages) {
  double total = 0.0;
  for (std::size_t u = 0; u < batch.episodes.size(); ++u) {
    const auto& ep = batch.episodes[u];
    for (int t = 0; t < ep.length(); ++t) {
      const double lp =
          policy_log_prob(policy, ep.steps[t].state_idx, ep.steps[t].action);
      const double q = std::exp(lp - ep.steps[t].log_prob_behavior);
      total += q * advantages[u][t];
    }
  }
  return total / std::max(batch.num_episodes(), 1);
}

double mean_sampled_kl(const AnyPolicy& old_policy, const AnyPolicy& new_policy,
                       const TrajectoryBatch& batch) {
  double total = 0.0;
  int count = 0;
  for (const auto& ep : batch.episodes) {
    for (const auto& tr : ep.steps) {
      total += kl_divergence(old_policy, new_policy, tr.state_idx);
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

}  // namespace

TrpoStepResult trpo_step(const AnyPolicy& policy_old,
                         const TrajectoryBatch& batch,
                         const std::vector<std::vector<double>>& advantages,
                         const Vec& g, double delta, int cg_iters,
                         double damping, int horizon) {
  TrpoStepResult result{policy_old};
  if (g.norm() == 0.0) return result;  // nothing to do; keep the old policy

  auto hvp = [&](const Vec& v) {
    return fim_vector_product(policy_old, batch, v, damping, horizon);
  };
  const Vec x = conjugate_gradient(hvp, g, cg_iters);
  const double quad = x.dot(hvp(x));  // x^T H x
  if (!(quad > 0.0) || !std::isfinite(quad)) {
    return result;  // curvature unusable even with damping; freeze
  }
  const Vec full_step = std::sqrt(delta / quad) * x;

  const FactorLayout layout = policy_layout(policy_old);
  const Vec params = layout.flatten(policy_model(policy_old));
  const double surrogate_old = clip_surrogate_base(policy_old, batch, advantages);

  double shrink = 1.0;
  for (int attempt = 0; attempt <= 10; ++attempt, shrink *= 0.5) {
    const Vec candidate_params = params + shrink * full_step;
    if (!candidate_params.allFinite()) continue;
    AnyPolicy candidate =
        policy_with_factors(policy_old, layout.unflatten(candidate_params));
    const double kl = mean_sampled_kl(policy_old, candidate, batch);
    const double surrogate = clip_surrogate_base(candidate, batch, advantages);
    if (kl <= delta && surrogate > surrogate_old) {
      result.policy = std::move(candidate);
      result.accepted = true;
      result.kl_used = kl;
      // (s*Delta)^T H (s*Delta) = s^2 * delta by construction of Delta
      result.constraint_value = shrink * shrink * delta;
      result.backtracks = attempt;
      return result;
    }
  }
  return result;  // all candidates rejected; policy unchanged
}

double ppo_clip(double q, double epsilon) {
  return std::clamp(q, 1.0 - epsilon, 1.0 + epsilon);
}

Vec ppo_gradient(const AnyPolicy& policy, const TrajectoryBatch& batch,
                 const std::vector<std::vector<double>>& advantages,
                 double epsilon) {
  Vec grad = Vec::Zero(policy_layout(policy).size());
  if (batch.num_episodes() == 0) return grad;
  const double scale = 1.0 / batch.num_episodes();
  for (std::size_t u = 0; u < batch.episodes.size(); ++u) {
    const auto& ep = batch.episodes[u];
    for (int t = 0; t < ep.length(); ++t) {
      const double adv = advantages[u][t];
      const double lp =
          policy_log_prob(policy, ep.steps[t].state_idx, ep.steps[t].action);
      const double q = std::exp(lp - ep.steps[t].log_prob_behavior);
      // Masked iff the ratio is past the clip boundary on the side where
      // clipping (not the raw ratio) is the active min{} branch.
      const bool masked =
          (q <= 1.0 - epsilon && adv <= 0.0) || (q >= 1.0 + epsilon && adv >= 0.0);
      if (masked || adv == 0.0) continue;
      policy_score(policy, ep.steps[t].state_idx, ep.steps[t].action)
          .add_scaled_to(grad, scale * q * adv);
    }
  }
  return grad;
}

AnyPolicy make_initial_policy(const Environment& env, const TrainerConfig& config) {
  std::vector<int> dims = env.discretizer().mode_dims();
  const ActionSpace& space = env.action_space();
  Rng rng = make_rng(derive_seed(config.seed, 0x41435430, 0xA11CE));
  if (space.discrete) {
    if (space.action_dim > 1) dims.push_back(space.action_dim);
    dims.push_back(space.num_actions);
    ParafacModel logits = random_policy_model(TensorShape(dims), config.rank, rng);
    return SoftmaxPolicy(std::move(logits), config.beta, space.action_dim);
  }
  if (space.action_dim > 1) dims.push_back(space.action_dim);
  ParafacModel means = random_policy_model(TensorShape(dims), config.rank, rng);
  return GaussianPolicy(std::move(means), config.sigma, space.action_dim);
}

namespace {

CriticModel make_initial_critic(const Environment& env, const TrainerConfig& config) {
  const std::vector<int> dims = env.discretizer().mode_dims();
  const int rank = config.critic_rank > 0 ? config.critic_rank : config.rank;
  Rng rng = make_rng(derive_seed(config.seed, 0x43524954, 0x1C));
  return CriticModel(random_critic_model(TensorShape(dims), rank, rng,
                                         config.critic_init_scale));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Lower-interpolation percentile: sorted[floor(f * (n-1))].
double percentile_lower(std::vector<double> v, double f) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::floor(f * static_cast<double>(v.size() - 1)));
  return v[idx];
}

std::vector<std::vector<double>> normalize_advantages(
    std::vector<std::vector<double>> adv) {
  double sum = 0.0;
  int n = 0;
  for (const auto& row : adv) {
    for (double a : row) {
      sum += a;
      ++n;
    }
  }
  if (n == 0) return adv;
  const double mean = sum / n;
  double var = 0.0;
  for (const auto& row : adv) {
    for (double a : row) var += (a - mean) * (a - mean);
  }
  const double sd = std::sqrt(var / n);
  if (sd < 1e-12) return adv;  // constant advantages: leave them alone
  for (auto& row : adv) {
    for (double& a : row) a = (a - mean) / sd;
  }
  return adv;
}

// Rebuild the policy with this iteration's exploration parameter
// (sigma decay for Gaussians, temperature growth for softmax).
AnyPolicy apply_exploration_schedule(const AnyPolicy& policy,
                                     const TrainerConfig& config, int h) {
  if (const auto* g = std::get_if<GaussianPolicy>(&policy)) {
    if (config.sigma_decay == 1.0) return policy;
    const double sigma = config.sigma * std::pow(config.sigma_decay, h);
    return g->with_sigma(std::max(sigma, 1e-8));
  }
  const auto& s = std::get<SoftmaxPolicy>(policy);
  if (config.beta_growth == 1.0) return policy;
  return s.with_temperature(config.beta * std::pow(config.beta_growth, h));
}

TrainResult run_training(const Environment& env, const TrainerConfig& config) {
  config.validate();
  TrainResult result{make_initial_policy(env, config),
                     make_initial_critic(env, config),
                     {}};
  TrainingLog& log = result.log;
  log.algorithm = to_string(config.algorithm);
  log.env = env.name();
  log.seed = config.seed;
  log.run_id = log.algorithm + "_" + log.env + "_s" + std::to_string(config.seed);

  const bool uses_critic = config.algorithm != Algorithm::TLRPG;
  const double eta_base = config.eta_schedule == "inv_sqrt_H"
                              ? config.eta / std::sqrt(config.iterations)
                              : config.eta;
  const FactorLayout layout = policy_layout(result.policy);

  for (int h = 0; h < config.iterations; ++h) {
    const auto tic = std::chrono::steady_clock::now();
    result.policy = apply_exploration_schedule(result.policy, config, h);

    TrajectoryBatch batch =
        sample_batch(env, result.policy, config.num_trajectories, config.horizon,
                     config.seed, static_cast<std::uint64_t>(h),
                     config.rollout_threads);
    returns_to_go(batch);
    for (double g0 : batch.episode_returns()) log.episode_returns.push_back(g0);

    std::vector<std::vector<double>> adv;
    if (uses_critic) {
      adv = advantages(batch, result.critic);
      if (config.advantage_norm) adv = normalize_advantages(adv);
    }

    IterationStats stats;
    stats.iteration = h;
    const std::vector<double> g0s = batch.episode_returns();
    stats.mean_return = mean_of(g0s);
    stats.median_return = percentile_lower(g0s, 0.5);

    const Vec params = layout.flatten(policy_model(result.policy));
    Vec new_params = params;
    Vec diagnostic_grad;

    switch (config.algorithm) {
      case Algorithm::TLRPG: {
        diagnostic_grad = pg_gradient(result.policy, batch);
        new_params = project_box(params + eta_base * diagnostic_grad, config.bound);
        break;
      }
      case Algorithm::TLRAC: {
        diagnostic_grad = advantage_weighted_gradient(result.policy, batch, adv);
        new_params = project_box(params + eta_base * diagnostic_grad, config.bound);
        break;
      }
      case Algorithm::TRTLRPO: {
        diagnostic_grad = advantage_weighted_gradient(result.policy, batch, adv);
        TrpoStepResult step =
            trpo_step(result.policy, batch, adv, diagnostic_grad, config.delta,
                      config.cg_iters, config.cg_damping, config.horizon);
        stats.kl_used = step.kl_used;
        stats.tr_accepted = step.accepted;
        stats.tr_constraint_value = step.constraint_value;
        new_params = project_box(layout.flatten(policy_model(step.policy)),
                                 config.bound);
        break;
      }
      case Algorithm::PTLRPO: {
        AnyPolicy current = result.policy;
        for (int e = 0; e < config.ppo_epochs; ++e) {
          const Vec grad = ppo_gradient(current, batch, adv, config.epsilon);
          if (e == 0) diagnostic_grad = grad;
          const Vec stepped =
              project_box(layout.flatten(policy_model(current)) + eta_base * grad,
                          config.bound);
          if (!stepped.allFinite()) break;
          current = policy_with_factors(current, layout.unflatten(stepped));
        }
        new_params = layout.flatten(policy_model(current));
        break;
      }
    }

    if (!new_params.allFinite()) {
      log.aborted = true;  // keep the last good policy and stop
      break;
    }
    result.policy = policy_with_factors(result.policy, layout.unflatten(new_params));

    if (uses_critic && config.critic_init_scale > 0.0 && config.alpha > 0.0) {
      try {
        result.critic = critic_step(result.critic, batch, config.alpha);
      } catch (const std::runtime_error&) {
        log.aborted = true;  // non-finite critic: stop with the last good one
        break;
      }
    }

    stats.grad_mapping_norm =
        diagnostic_grad.size() > 0
            ? gradient_mapping_norm(params, diagnostic_grad, config.moreau_lambda,
                                    config.bound)
            : 0.0;
    stats.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  tic)
            .count();
    log.iterations.push_back(stats);
    if (config.iteration_hook) config.iteration_hook(h, result.policy, result.critic);
  }
  return result;
}

}  // namespace

TrainResult tlrpg_train(const Environment& env, const TrainerConfig& config) {
  TrainerConfig c = config;
  c.algorithm = Algorithm::TLRPG;
  return run_training(env, c);
}

TrainResult tlrac_train(const Environment& env, const TrainerConfig& config) {
  TrainerConfig c = config;
  c.algorithm = Algorithm::TLRAC;
  return run_training(env, c);
}

TrainResult trtlrpo_train(const Environment& env, const TrainerConfig& config) {
  TrainerConfig c = config;
  c.algorithm = Algorithm::TRTLRPO;
  return run_training(env, c);
}

TrainResult ptlrpo_train(const Environment& env, const TrainerConfig& config) {
  TrainerConfig c = config;
  c.algorithm = Algorithm::PTLRPO;
  return run_training(env, c);
}

TrainResult train(const Environment& env, const TrainerConfig& config) {
  return run_training(env, config);
}

}  // namespace tlr
