#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tlr/policies.hpp"
#include "tlr/rng.hpp"
#include "tlr/tensor.hpp"

namespace tlr {

/// Uniform grid over a closed interval. Values are clamped into [low, high]
/// before binning, so the map is total.
struct GridSpec {
  double low = 0.0;
  double high = 1.0;
  int bins = 1;
};

class Discretizer {
 public:
  Discretizer() = default;
  explicit Discretizer(std::vector<GridSpec> specs);

  int num_dims() const { return static_cast<int>(specs_.size()); }
  const GridSpec& spec(int d) const { return specs_.at(static_cast<std::size_t>(d)); }
  /// bins per dimension, i.e. the state-tensor mode sizes.
  std::vector<int> mode_dims() const;

  /// bin = floor((clamp(x) - low) / (high - low) * bins), capped at bins-1.
  MultiIndex discretize(const Vec& state) const;

 private:
  std::vector<GridSpec> specs_;
};

struct ActionSpace {
  bool discrete = false;
  int action_dim = 1;   // P
  int num_actions = 0;  // C per dimension (discrete only)
  Vec low, high;        // clamp bounds (continuous only)
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool done = false;
};

/// Stateless episodic MDP: transitions are pure functions of (state, action,
/// step index, rng), so parallel rollouts just share one const instance.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual Vec reset(Rng& rng) const = 0;
  /// `t` is the 0-based step index within the episode (the wireless arrival
  /// process is time-dependent; the others ignore it).
  virtual StepResult step(const Vec& state, const Action& action, int t,
                          Rng& rng) const = 0;
  virtual const Discretizer& discretizer() const = 0;
  virtual const ActionSpace& action_space() const = 0;
  /// Uniform bound R with |reward| <= R for every transition; asserted per step.
  virtual double reward_bound() const = 0;

  MultiIndex discretize(const Vec& state) const {
    return discretizer().discretize(state);
  }
  /// Clamp a continuous action into the action space (no-op for discrete).
  Action clamp_action(const Action& action) const;
  /// Validates discrete actions; throws std::invalid_argument on mismatch.
  void check_action(const Action& action) const;
};

/// Deterministic-by-default grid: start fixed at (0,0), per-step reward -1,
/// +10 bonus on entering the goal (so the goal step pays -1 + 10 = 9), walls
/// block. With slip_prob > 0 the taken action is replaced by a uniformly
/// random one with that probability.
class Gridworld : public Environment {
 public:
  // Action indices (C = 4).
  static constexpr int kUp = 0;
  static constexpr int kRight = 1;
  static constexpr int kDown = 2;
  static constexpr int kLeft = 3;

  Gridworld(int rows, int cols, int goal_row, int goal_col,
            double step_reward = -1.0, double goal_reward = 10.0,
            double slip_prob = 0.0);

  std::string name() const override { return "gridworld"; }
  Vec reset(Rng& rng) const override;
  StepResult step(const Vec& state, const Action& action, int t,
                  Rng& rng) const override;
  const Discretizer& discretizer() const override { return disc_; }
  const ActionSpace& action_space() const override { return actions_; }
  double reward_bound() const override;

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int goal_row() const { return goal_row_; }
  int goal_col() const { return goal_col_; }
  double step_reward() const { return step_reward_; }
  double goal_reward() const { return goal_reward_; }
  double slip_prob() const { return slip_prob_; }

  /// Deterministic move (no slip): where action a leads from (r, c).
  std::pair<int, int> move(int r, int c, int a) const;

 private:
  int rows_, cols_, goal_row_, goal_col_;
  double step_reward_, goal_reward_, slip_prob_;
  Discretizer disc_;
  ActionSpace actions_;
};

/// Classic car-on-a-hill, published dynamics. Discrete variant: 3 actions
/// (push left / idle / push right); continuous variant: force in [-1, 1].
class MountainCar : public Environment {
 public:
  MountainCar(bool discrete_actions, int position_bins = 20,
              int velocity_bins = 20);

  std::string name() const override {
    return discrete_ ? "mountaincar" : "mountaincar_continuous";
  }
  Vec reset(Rng& rng) const override;
  StepResult step(const Vec& state, const Action& action, int t,
                  Rng& rng) const override;
  const Discretizer& discretizer() const override { return disc_; }
  const ActionSpace& action_space() const override { return actions_; }
  double reward_bound() const override { return discrete_ ? 1.0 : 100.1; }

 private:
  bool discrete_;
  Discretizer disc_;
  ActionSpace actions_;
};

/// Torque-controlled pendulum swing-up, published dynamics. State is the
/// observation (cos th, sin th, th_dot). Discrete variant: torques {-2, 0, 2}.
class Pendulum : public Environment {
 public:
  Pendulum(bool discrete_actions, int bins_per_dim = 10);

  std::string name() const override {
    return discrete_ ? "pendulum_discrete" : "pendulum";
  }
  Vec reset(Rng& rng) const override;
  StepResult step(const Vec& state, const Action& action, int t,
                  Rng& rng) const override;
  const Discretizer& discretizer() const override { return disc_; }
  const ActionSpace& action_space() const override { return actions_; }
  double reward_bound() const override { return 16.28; }

 private:
  bool discrete_;
  Discretizer disc_;
  ActionSpace actions_;
};

/// Opportunistic multi-channel transmission with energy harvesting.
/// State (6 dims): per-channel fading gain, per-channel occupancy flag,
/// battery level, queue length. Action (2 dims): transmit power per channel.
/// Packets arrive in bursts on a fixed period; transmitting on an occupied
/// channel loses most of the packets; reward trades battery against queue.
struct WirelessConfig {
  int channels = 2;
  int packet_arrival_period = 10;  // steps between arrival bursts
  double packets_per_arrival = 5.0;
  double queue_capacity = 10.0;
  double battery_capacity = 10.0;
  double harvest_probability = 0.4;  // chance of +1 energy per step
  double occupancy_probability = 0.3;
  std::vector<double> fading_levels = {0.5, 1.0, 1.5, 2.0};
  double loss_fraction_when_occupied = 0.8;
  double battery_weight = 0.1;
  double queue_weight = 1.0;
  double noise_power = 1.0;
  double max_power = 1.0;  // per-channel action bound
  int bins_per_continuous_dim = 4;

  void validate() const;
};

class Wireless : public Environment {
 public:
  explicit Wireless(WirelessConfig config = {});

  std::string name() const override { return "wireless"; }
  Vec reset(Rng& rng) const override;
  StepResult step(const Vec& state, const Action& action, int t,
                  Rng& rng) const override;
  const Discretizer& discretizer() const override { return disc_; }
  const ActionSpace& action_space() const override { return actions_; }
  double reward_bound() const override;

  const WirelessConfig& config() const { return config_; }

 private:
  double draw_fading(Rng& rng) const;

  WirelessConfig config_;
  Discretizer disc_;
  ActionSpace actions_;
};

/// Build an environment from a JSON spec: {"name": ..., params...}.
/// Unknown names throw std::invalid_argument. Every parameter has a default,
/// so {"name": "gridworld"} is a complete spec.
std::unique_ptr<Environment> make_env(const nlohmann::json& spec);

}  // namespace tlr
