// Command-line front end: seed-sweep training runs, the PARAFAC rank-sweep
// tool, the gridworld value-iteration oracle, and checkpoint evaluation.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "tlr/als.hpp"
#include "tlr/environments.hpp"
#include "tlr/harness.hpp"
#include "tlr/policies.hpp"
#include "tlr/tensor_io.hpp"
#include "tlr/trainers.hpp"
#include "tlr/trajectory.hpp"
#include "tlr/value_iteration.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// Thrown for problems the user can fix in flags or config files, as opposed
// to failures during the run itself.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Environment specs are accepted as a JSON file path, an inline JSON object,
// the shorthand "RxC" (deterministic gridworld, goal in the far corner), or
// a bare environment name.
json parse_env_spec(const std::string& arg) {
  if (fs::exists(arg)) return read_json_file(arg);
  if (!arg.empty() && arg.front() == '{') {
    try {
      return json::parse(arg);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("inline env spec: ") + e.what());
    }
  }
  std::smatch m;
  if (std::regex_match(arg, m, std::regex(R"((\d+)x(\d+))"))) {
    const int rows = std::stoi(m[1]), cols = std::stoi(m[2]);
    return json{{"name", "gridworld"},
                {"rows", rows},
                {"cols", cols},
                {"goal_row", rows - 1},
                {"goal_col", cols - 1}};
  }
  return json{{"name", arg}};
}

std::vector<std::uint64_t> parse_seed_list(const std::string& arg) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "' in --seeds");
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty list");
  return seeds;
}

std::vector<int> parse_rank_list(const std::string& arg) {
  std::vector<int> ranks;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      ranks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad rank '" + item + "' in --ranks");
    }
  }
  return ranks;
}

int cmd_train(const std::string& config_path, const std::string& seeds_arg,
              const std::string& out_dir, int parallel) {
  tlr::ExperimentConfig config;
  try {
    config = tlr::ExperimentConfig::from_json(read_json_file(config_path));
    if (!seeds_arg.empty()) config.seeds = parse_seed_list(seeds_arg);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (parallel > 0) config.parallel_seeds = parallel;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const tlr::AggregateResult agg = tlr::run_experiment(config);
    if (!agg.p50.empty()) {
      std::cout << "iterations: " << agg.p50.size() << "\n"
                << "final median return: " << agg.p50.back() << "  (p25 "
                << agg.p25.back() << ", p75 " << agg.p75.back() << ")\n";
    }
    std::cout << "outputs in " << config.output_dir << "\n";
    if (!agg.failed_seeds.empty()) {
      std::cerr << agg.failed_seeds.size() << " seed(s) aborted\n";
      return kExitRuntime;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_rank_sweep(const std::string& tensor_path, const std::string& ranks_arg,
                   int restarts, const std::string& out_csv,
                   std::uint64_t seed) {
  tlr::DenseTensor tensor;
  std::vector<int> ranks;
  try {
    tensor = tlr::load_dense_tensor_any(tensor_path);
    ranks = parse_rank_list(ranks_arg);
    if (ranks.empty()) throw ConfigError("--ranks: empty list");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const auto rows = tlr::rank_sweep(tensor, ranks, restarts, seed);
    std::cout << "rank  nfe           sweeps\n";
    for (const auto& row : rows) {
      std::printf("%-5d %-13.6g %d\n", row.rank, row.nfe, row.iterations);
    }
    if (!out_csv.empty()) {
      tlr::write_rank_sweep_csv(rows, out_csv);
      std::cout << "wrote " << out_csv << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "rank sweep failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_oracle(const std::string& grid_arg, double gamma, double tol,
               int horizon, const std::string& out_csv) {
  std::unique_ptr<tlr::Environment> env;
  const tlr::Gridworld* grid = nullptr;
  try {
    env = tlr::make_env(parse_env_spec(grid_arg));
    grid = dynamic_cast<const tlr::Gridworld*>(env.get());
    if (grid == nullptr) throw ConfigError("--grid must describe a gridworld");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const tlr::GridworldOracle oracle =
        tlr::value_iteration_oracle(*grid, gamma, tol, horizon);
    std::cout << "optimal return from start: " << oracle.optimal_return << "\n"
              << "value iterations: " << oracle.iterations
              << "  (bellman residual " << oracle.bellman_residual << ")\n";

    const char arrows[] = {'^', '>', 'v', '<'};
    std::cout << "greedy policy ('G' = goal):\n";
    for (int r = 0; r < grid->rows(); ++r) {
      for (int c = 0; c < grid->cols(); ++c) {
        const bool goal = r == grid->goal_row() && c == grid->goal_col();
        std::cout << (goal ? 'G' : arrows[oracle.greedy_policy[r * grid->cols() + c]]);
      }
      std::cout << "\n";
    }

    if (!out_csv.empty()) {
      std::ofstream out(out_csv);
      if (!out) throw std::runtime_error("cannot open " + out_csv);
      out << "row,col,value,greedy_action\n";
      for (int r = 0; r < grid->rows(); ++r)
        for (int c = 0; c < grid->cols(); ++c) {
          const int s = r * grid->cols() + c;
          char buf[40];
          std::snprintf(buf, sizeof(buf), "%.17g", oracle.values[s]);
          out << r << ',' << c << ',' << buf << ','
              << oracle.greedy_policy[s] << "\n";
        }
      std::cout << "wrote " << out_csv << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "oracle failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

void dump_trajectories(const tlr::TrajectoryBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const int state_dims =
      batch.episodes.empty() || batch.episodes[0].steps.empty()
          ? 0
          : static_cast<int>(batch.episodes[0].steps[0].raw_state.size());
  const int action_dims =
      state_dims == 0
          ? 0
          : static_cast<int>(batch.episodes[0].steps[0].action.values.size());
  out << "episode,t";
  for (int d = 0; d < state_dims; ++d) out << ",s" << d;
  for (int p = 0; p < action_dims; ++p) out << ",a" << p;
  out << ",reward\n";
  char buf[40];
  for (std::size_t u = 0; u < batch.episodes.size(); ++u) {
    const tlr::Episode& ep = batch.episodes[u];
    for (int t = 0; t < ep.length(); ++t) {
      out << u << ',' << t;
      for (int d = 0; d < state_dims; ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", ep.steps[t].raw_state[d]);
        out << ',' << buf;
      }
      for (int p = 0; p < action_dims; ++p) {
        std::snprintf(buf, sizeof(buf), "%.17g", ep.steps[t].action.values[p]);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", ep.steps[t].reward);
      out << ',' << buf << "\n";
    }
  }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& env_arg,
             int episodes, int horizon, std::uint64_t seed,
             const std::string& dump_csv) {
  tlr::AnyPolicy policy = tlr::SoftmaxPolicy(
      tlr::ParafacModel::constant(tlr::TensorShape({1, 1}), 1, 0.0), 1.0);
  std::unique_ptr<tlr::Environment> env;
  try {
    policy = tlr::load_policy_checkpoint(checkpoint_path);
    env = tlr::make_env(parse_env_spec(env_arg));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    tlr::TrajectoryBatch batch =
        tlr::sample_batch(*env, policy, episodes, horizon, seed);
    tlr::returns_to_go(batch);
    const std::vector<double> returns = batch.episode_returns();
    double mean = 0.0;
    for (double g : returns) mean += g;
    mean /= static_cast<double>(returns.size());

    std::cout << "episodes: " << episodes << "  horizon: " << horizon << "\n"
              << "mean return: " << mean << "\n"
              << "median return: " << tlr::percentile_lower(returns, 0.5)
              << "  (p25 " << tlr::percentile_lower(returns, 0.25) << ", p75 "
              << tlr::percentile_lower(returns, 0.75) << ")\n";
    if (!dump_csv.empty()) {
      dump_trajectories(batch, dump_csv);
      std::cout << "wrote " << dump_csv << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank tensor policy toolkit"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run a seed sweep from a JSON experiment config");
  std::string config_path;
  std::string seeds_arg;
  std::string out_dir;
  int parallel = 0;
  train->add_option("--config", config_path, "experiment config JSON file")->required();
  train->add_option("--seeds", seeds_arg, "comma-separated seed list (overrides config)");
  train->add_option("--out", out_dir, "output directory (overrides config)");
  train->add_option("--parallel", parallel, "seed-level worker count (overrides config)");

  // rank-sweep
  auto* sweep = app.add_subcommand("rank-sweep", "ALS fit error for a list of CP ranks");
  std::string tensor_path;
  std::string ranks_arg;
  int restarts = 1;
  std::string sweep_csv;
  std::uint64_t sweep_seed = 0;
  sweep->add_option("--tensor", tensor_path, "dense tensor file (.bin or .json)")->required();
  sweep->add_option("--ranks", ranks_arg, "comma-separated rank list")->required();
  sweep->add_option("--restarts", restarts, "ALS restarts per rank (best kept)");
  sweep->add_option("--out", sweep_csv, "output CSV path");
  sweep->add_option("--seed", sweep_seed, "restart-initialization seed");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "gridworld value-iteration reference solution");
  std::string grid_arg;
  double gamma = 1.0;
  double tol = 1e-10;
  int oracle_horizon = 50;
  std::string oracle_csv;
  oracle->add_option("--grid", grid_arg, "gridworld spec: 'RxC', JSON, or file")->required();
  oracle->add_option("--gamma", gamma, "discount factor");
  oracle->add_option("--tol", tol, "Bellman residual tolerance");
  oracle->add_option("--horizon", oracle_horizon, "episode length for the reported return");
  oracle->add_option("--out", oracle_csv, "per-state values CSV path");

  // eval
  auto* eval = app.add_subcommand("eval", "roll out a saved policy checkpoint");
  std::string checkpoint_path;
  std::string env_arg;
  int episodes = 100;
  int eval_horizon = 50;
  std::uint64_t eval_seed = 0;
  std::string dump_csv;
  eval->add_option("--checkpoint", checkpoint_path, "policy checkpoint file")->required();
  eval->add_option("--env", env_arg, "environment spec: name, JSON, or file")->required();
  eval->add_option("--episodes", episodes, "number of evaluation episodes");
  eval->add_option("--horizon", eval_horizon, "maximum steps per episode");
  eval->add_option("--seed", eval_seed, "rollout seed");
  eval->add_option("--dump", dump_csv, "write sampled trajectories to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;  // --help exits cleanly
  }

  if (train->parsed()) return cmd_train(config_path, seeds_arg, out_dir, parallel);
  if (sweep->parsed()) return cmd_rank_sweep(tensor_path, ranks_arg, restarts, sweep_csv, sweep_seed);
  if (oracle->parsed()) return cmd_oracle(grid_arg, gamma, tol, oracle_horizon, oracle_csv);
  if (eval->parsed()) return cmd_eval(checkpoint_path, env_arg, episodes, eval_horizon, eval_seed, dump_csv);
  return kExitConfig;
}
