#include "tlr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "tlr/environments.hpp"

namespace fs = std::filesystem;

namespace tlr {

double percentile_lower(std::vector<double> values, double fraction) {
  if (values.empty()) {
    throw std::invalid_argument("percentile_lower: empty sample");
  }
  if (fraction < 0.0 || fraction > 1.0) {
    throw std::invalid_argument("percentile_lower: fraction outside [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(values.size() - 1)));
  return values[idx];
}

nlohmann::json trainer_config_to_json(const TrainerConfig& config) {
  nlohmann::json j;
  j["algorithm"] = to_string(config.algorithm);
  j["rank"] = config.rank;
  j["critic_rank"] = config.critic_rank;
  j["eta"] = config.eta;
  j["eta_schedule"] = config.eta_schedule;
  j["alpha"] = config.alpha;
  j["num_trajectories"] = config.num_trajectories;
  j["horizon"] = config.horizon;
  j["iterations"] = config.iterations;
  j["delta"] = config.delta;
  j["epsilon"] = config.epsilon;
  j["ppo_epochs"] = config.ppo_epochs;
  j["cg_iters"] = config.cg_iters;
  j["cg_damping"] = config.cg_damping;
  j["sigma"] = config.sigma;
  j["sigma_decay"] = config.sigma_decay;
  j["beta"] = config.beta;
  j["beta_growth"] = config.beta_growth;
  if (std::isinf(config.bound)) {
    j["bound"] = "inf";
  } else {
    j["bound"] = config.bound;
  }
  j["moreau_lambda"] = config.moreau_lambda;
  j["advantage_norm"] = config.advantage_norm;
  j["critic_init_scale"] = config.critic_init_scale;
  j["rollout_threads"] = config.rollout_threads;
  j["seed"] = config.seed;
  return j;
}

TrainerConfig trainer_config_from_json(const nlohmann::json& j) {
  TrainerConfig c;
  if (j.contains("algorithm")) {
    c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  }
  c.rank = j.value("rank", c.rank);
  c.critic_rank = j.value("critic_rank", c.critic_rank);
  c.eta = j.value("eta", c.eta);
  c.eta_schedule = j.value("eta_schedule", c.eta_schedule);
  c.alpha = j.value("alpha", c.alpha);
  c.num_trajectories = j.value("num_trajectories", c.num_trajectories);
  c.horizon = j.value("horizon", c.horizon);
  c.iterations = j.value("iterations", c.iterations);
  c.delta = j.value("delta", c.delta);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.ppo_epochs = j.value("ppo_epochs", c.ppo_epochs);
  c.cg_iters = j.value("cg_iters", c.cg_iters);
  c.cg_damping = j.value("cg_damping", c.cg_damping);
  c.sigma = j.value("sigma", c.sigma);
  c.sigma_decay = j.value("sigma_decay", c.sigma_decay);
  c.beta = j.value("beta", c.beta);
  c.beta_growth = j.value("beta_growth", c.beta_growth);
  if (j.contains("bound")) {
    const auto& b = j.at("bound");
    if (b.is_string()) {
      if (b.get<std::string>() != "inf") {
        throw std::invalid_argument("config: bound must be a number or \"inf\"");
      }
      c.bound = std::numeric_limits<double>::infinity();
    } else {
      c.bound = b.get<double>();
    }
  }
  c.moreau_lambda = j.value("moreau_lambda", c.moreau_lambda);
  c.advantage_norm = j.value("advantage_norm", c.advantage_norm);
  c.critic_init_scale = j.value("critic_init_scale", c.critic_init_scale);
  c.rollout_threads = j.value("rollout_threads", c.rollout_threads);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (!env_spec.contains("name")) {
    throw std::invalid_argument("experiment: env spec needs a \"name\"");
  }
  if (seeds.empty()) throw std::invalid_argument("experiment: need at least one seed");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) {
    throw std::invalid_argument("experiment: seeds must be distinct");
  }
  if (output_dir.empty()) throw std::invalid_argument("experiment: empty output_dir");
  if (checkpoint_every < 0) {
    throw std::invalid_argument("experiment: checkpoint_every must be >= 0");
  }
  if (parallel_seeds < 1) {
    throw std::invalid_argument("experiment: parallel_seeds must be >= 1");
  }
  trainer.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["env"] = env_spec;
  j["trainer"] = trainer_config_to_json(trainer);
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["checkpoint_every"] = checkpoint_every;
  j["parallel_seeds"] = parallel_seeds;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.env_spec = j.at("env");
  if (j.contains("trainer")) c.trainer = trainer_config_from_json(j.at("trainer"));
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    const int n = j.value("num_seeds", 20);
    const std::uint64_t base = j.value("seed_base", 0ULL);
    for (int i = 0; i < n; ++i) c.seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.parallel_seeds = j.value("parallel_seeds", c.parallel_seeds);
  c.validate();
  return c;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct SeedOutcome {
  bool ok = false;
  TrainingLog log;
};

SeedOutcome run_one_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedOutcome outcome;
  const auto env = make_env(config.env_spec);
  TrainerConfig trainer = config.trainer;
  trainer.seed = seed;

  const fs::path out(config.output_dir);
  const bool has_critic = trainer.algorithm != Algorithm::TLRPG;
  if (config.checkpoint_every > 0) {
    const int every = config.checkpoint_every;
    trainer.iteration_hook = [&out, seed, every, has_critic](
                                 int h, const AnyPolicy& policy,
                                 const CriticModel& critic) {
      if ((h + 1) % every != 0) return;
      const std::string tag = "seed_" + std::to_string(seed) + "_iter_" +
                              std::to_string(h + 1);
      save_policy_checkpoint(policy, (out / ("policy_" + tag + ".ckpt")).string());
      if (has_critic) {
        save_critic_checkpoint(critic.vf, (out / ("critic_" + tag + ".ckpt")).string());
      }
    };
  }

  TrainResult result = train(*env, trainer);
  outcome.log = std::move(result.log);
  outcome.ok = true;

  const std::string stem = "seed_" + std::to_string(seed);
  outcome.log.write_csv((out / (stem + ".csv")).string());
  save_policy_checkpoint(result.policy, (out / ("policy_" + stem + ".ckpt")).string());
  if (has_critic) {
    save_critic_checkpoint(result.critic.vf,
                           (out / ("critic_" + stem + ".ckpt")).string());
  }
  return outcome;
}

}  // namespace

void AggregateResult::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("aggregate: cannot open " + path);
  out << "iteration,p25,median,p75,seeds\n";
  for (std::size_t i = 0; i < p50.size(); ++i) {
    out << i << ',' << fmt_double(p25[i]) << ',' << fmt_double(p50[i]) << ','
        << fmt_double(p75[i]) << ',' << seeds_at_iteration[i] << "\n";
  }
}

AggregateResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  {
    std::ofstream out(fs::path(config.output_dir) / "config.json");
    out << config.to_json().dump(2) << "\n";
  }

  const int num_seeds = static_cast<int>(config.seeds.size());
  std::vector<SeedOutcome> outcomes(num_seeds);

  // Bounded pool; outcomes land in seed order regardless of scheduling.
  std::atomic<int> next{0};
  std::mutex warn_mutex;
  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < num_seeds; i = next.fetch_add(1)) {
      try {
        outcomes[i] = run_one_seed(config, config.seeds[i]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(warn_mutex);
        std::cerr << "warning: seed " << config.seeds[i] << " failed: " << e.what()
                  << "\n";
      }
    }
  };
  const int pool = std::min(config.parallel_seeds, num_seeds);
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (int i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }

  // A seed counts as completed only if it ran to the last iteration; runs
  // that aborted on non-finite parameters are reported as failures.
  const auto completed = [](const SeedOutcome& outcome) {
    return outcome.ok && !outcome.log.aborted;
  };

  AggregateResult agg;
  std::size_t max_len = 0;
  for (int i = 0; i < num_seeds; ++i) {
    if (!completed(outcomes[i])) {
      agg.failed_seeds.push_back(config.seeds[i]);
      continue;
    }
    max_len = std::max(max_len, outcomes[i].log.iterations.size());
  }
  if (!agg.failed_seeds.empty()) {
    std::cerr << "warning: aggregating over " << (num_seeds - static_cast<int>(agg.failed_seeds.size()))
              << "/" << num_seeds << " seeds\n";
  }
  for (std::size_t it = 0; it < max_len; ++it) {
    std::vector<double> vals;
    for (const auto& outcome : outcomes) {
      if (completed(outcome) && it < outcome.log.iterations.size()) {
        vals.push_back(outcome.log.iterations[it].mean_return);
      }
    }
    if (vals.empty()) break;
    agg.p25.push_back(percentile_lower(vals, 0.25));
    agg.p50.push_back(percentile_lower(vals, 0.5));
    agg.p75.push_back(percentile_lower(vals, 0.75));
    agg.seeds_at_iteration.push_back(static_cast<int>(vals.size()));
  }
  agg.write_csv((fs::path(config.output_dir) / "aggregate.csv").string());
  return agg;
}

std::vector<RankSweepRow> rank_sweep(const DenseTensor& tensor,
                                     std::vector<int> ranks, int restarts,
                                     std::uint64_t seed) {
  if (ranks.empty()) throw std::invalid_argument("rank_sweep: empty rank list");
  for (int k : ranks) {
    if (k < 1) throw std::invalid_argument("rank_sweep: ranks must be >= 1");
  }
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());

  std::vector<RankSweepRow> rows;
  ParafacModel best_so_far;  // best model from the previous (smaller) rank
  double best_nfe = std::numeric_limits<double>::infinity();

  for (int rank : ranks) {
    AlsOptions options;
    options.restarts = std::max(1, restarts);
    options.seed = derive_seed(seed, 0x53574550, static_cast<std::uint64_t>(rank));

    // Carry the lower-rank solution forward: padded with zero columns it is
    // a valid rank-K model with the same NFE, so the sweep cannot go up.
    ParafacModel padded;
    if (best_so_far.rank() > 0 && best_so_far.rank() < rank) {
      std::vector<Mat> factors;
      for (int d = 0; d < best_so_far.num_modes(); ++d) {
        Mat f = Mat::Zero(best_so_far.shape().dim(d), rank);
        f.leftCols(best_so_far.rank()) = best_so_far.factor(d);
        factors.push_back(std::move(f));
      }
      padded = ParafacModel(best_so_far.shape(), rank, std::move(factors));
      options.init = &padded;
    }

    AlsResult fit = als_fit(tensor, rank, options);
    RankSweepRow row{rank, fit.final_nfe, fit.iterations};
    if (padded.rank() > 0 && best_nfe < row.nfe) {
      // ALS drifted upward from the warm start (ridge noise); keep the
      // padded model itself, which is an equally valid rank-K fit.
      row.nfe = best_nfe;
      fit.model = padded;
    }
    rows.push_back(row);
    best_so_far = std::move(fit.model);
    best_nfe = row.nfe;
  }
  return rows;
}

void write_rank_sweep_csv(const std::vector<RankSweepRow>& rows,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("rank_sweep: cannot open " + path);
  out << "rank,nfe,iterations\n";
  for (const auto& row : rows) {
    out << row.rank << ',' << fmt_double(row.nfe) << ',' << row.iterations << "\n";
  }
}

}  // namespace tlr
