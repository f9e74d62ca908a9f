#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlr/als.hpp"
#include "tlr/tensor.hpp"
#include "tlr/trainers.hpp"

namespace tlr {

/// Lower-interpolation percentile: sorted[floor(f * (n-1))], f in [0, 1].
/// The convention used for every aggregate in this toolkit.
double percentile_lower(std::vector<double> values, double fraction);

/// TrainerConfig <-> JSON. Missing fields keep their defaults; "bound"
/// accepts a number or the string "inf".
nlohmann::json trainer_config_to_json(const TrainerConfig& config);
TrainerConfig trainer_config_from_json(const nlohmann::json& j);

struct ExperimentConfig {
  nlohmann::json env_spec;  // make_env input
  TrainerConfig trainer;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  int checkpoint_every = 0;  // iterations between checkpoints; 0 = final only
  int parallel_seeds = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct AggregateResult {
  /// Percentiles of the per-seed mean batch return, per iteration, across
  /// the seeds that reached that iteration.
  std::vector<double> p25, p50, p75;
  std::vector<int> seeds_at_iteration;
  std::vector<std::uint64_t> failed_seeds;

  void write_csv(const std::string& path) const;
};

/// Train every seed (parallel up to config.parallel_seeds), writing
/// <out>/config.json, <out>/seed_<s>.csv, <out>/policy_seed_<s>.ckpt (plus
/// critic checkpoints for critic-bearing algorithms and periodic checkpoints
/// when checkpoint_every > 0), and <out>/aggregate.csv. Seeds that throw are
/// recorded as failed and skipped in the aggregate, with a stderr warning.
AggregateResult run_experiment(const ExperimentConfig& config);

struct RankSweepRow {
  int rank = 0;
  double nfe = 0.0;
  int iterations = 0;  // ALS sweeps used by the reported fit
};

/// Fit each rank (ascending) with best-of-restarts ALS. A copy of the best
/// lower-rank model padded with a zero column is always among the
/// candidates, so the reported NFE is non-increasing in K by construction.
std::vector<RankSweepRow> rank_sweep(const DenseTensor& tensor,
                                     std::vector<int> ranks, int restarts,
                                     std::uint64_t seed = 0);

void write_rank_sweep_csv(const std::vector<RankSweepRow>& rows,
                          const std::string& path);

}  // namespace tlr
