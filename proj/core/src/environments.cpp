#include "tlr/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tlr {

Discretizer::Discretizer(std::vector<GridSpec> specs) : specs_(std::move(specs)) {
  for (const auto& s : specs_) {
    if (s.bins < 1) throw std::invalid_argument("Discretizer: bins must be >= 1");
    if (!(s.low < s.high)) {
      throw std::invalid_argument("Discretizer: need low < high");
    }
  }
}

std::vector<int> Discretizer::mode_dims() const {
  std::vector<int> dims(specs_.size());
  for (std::size_t d = 0; d < specs_.size(); ++d) dims[d] = specs_[d].bins;
  return dims;
}

MultiIndex Discretizer::discretize(const Vec& state) const {
  if (state.size() != num_dims()) {
    throw std::invalid_argument("Discretizer: state dimension mismatch");
  }
  MultiIndex idx(specs_.size());
  for (std::size_t d = 0; d < specs_.size(); ++d) {
    const auto& s = specs_[d];
    const double x = std::clamp(state[static_cast<Eigen::Index>(d)], s.low, s.high);
    int bin = static_cast<int>(std::floor((x - s.low) / (s.high - s.low) *
                                          static_cast<double>(s.bins)));
    idx[d] = std::min(bin, s.bins - 1);
  }
  return idx;
}

Action Environment::clamp_action(const Action& action) const {
  const ActionSpace& space = action_space();
  if (space.discrete) return action;
  Action clamped = action;
  for (int p = 0; p < space.action_dim; ++p) {
    clamped.values[p] = std::clamp(action.values[p], space.low[p], space.high[p]);
  }
  return clamped;
}

void Environment::check_action(const Action& action) const {
  const ActionSpace& space = action_space();
  if (action.values.size() != space.action_dim) {
    throw std::invalid_argument(name() + ": action has wrong dimension");
  }
  if (!space.discrete) return;
  for (int p = 0; p < space.action_dim; ++p) {
    const double v = action.values[p];
    if (v != std::floor(v) || v < 0 || v >= space.num_actions) {
      throw std::invalid_argument(name() + ": invalid discrete action");
    }
  }
}

namespace {

void check_reward_bound(const Environment& env, double reward) {
  if (!std::isfinite(reward) || std::abs(reward) > env.reward_bound() + 1e-9) {
    throw std::logic_error(env.name() + ": reward " + std::to_string(reward) +
                           " violates declared bound " +
                           std::to_string(env.reward_bound()));
  }
}

}  // namespace

Gridworld::Gridworld(int rows, int cols, int goal_row, int goal_col,
                     double step_reward, double goal_reward, double slip_prob)
    : rows_(rows),
      cols_(cols),
      goal_row_(goal_row),
      goal_col_(goal_col),
      step_reward_(step_reward),
      goal_reward_(goal_reward),
      slip_prob_(slip_prob) {
  if (rows_ < 1 || cols_ < 1) {
    throw std::invalid_argument("Gridworld: need at least one row and column");
  }
  if (goal_row_ < 0 || goal_row_ >= rows_ || goal_col_ < 0 || goal_col_ >= cols_) {
    throw std::invalid_argument("Gridworld: goal outside the grid");
  }
  if (goal_row_ == 0 && goal_col_ == 0) {
    throw std::invalid_argument("Gridworld: goal coincides with the start cell");
  }
  if (slip_prob_ < 0.0 || slip_prob_ > 1.0) {
    throw std::invalid_argument("Gridworld: slip_prob outside [0, 1]");
  }
  // One bin per cell; a 1-wide axis still needs low < high for the grid spec.
  disc_ = Discretizer({
      {0.0, static_cast<double>(std::max(rows_ - 1, 1)), rows_},
      {0.0, static_cast<double>(std::max(cols_ - 1, 1)), cols_},
  });
  actions_.discrete = true;
  actions_.action_dim = 1;
  actions_.num_actions = 4;
}

Vec Gridworld::reset(Rng&) const { return Vec::Zero(2); }

std::pair<int, int> Gridworld::move(int r, int c, int a) const {
  switch (a) {
    case kUp: r -= 1; break;
    case kRight: c += 1; break;
    case kDown: r += 1; break;
    case kLeft: c -= 1; break;
    default:
      throw std::invalid_argument("Gridworld: invalid action");
  }
  r = std::clamp(r, 0, rows_ - 1);
  c = std::clamp(c, 0, cols_ - 1);
  return {r, c};
}

StepResult Gridworld::step(const Vec& state, const Action& action, int,
                           Rng& rng) const {
  check_action(action);
  int a = action.index();
  if (slip_prob_ > 0.0 && uniform_double(rng) < slip_prob_) {
    a = uniform_int(rng, 4);
  }
  const int r = static_cast<int>(state[0]);
  const int c = static_cast<int>(state[1]);
  auto [nr, nc] = move(r, c, a);
  StepResult result;
  result.next_state = Vec(2);
  result.next_state << static_cast<double>(nr), static_cast<double>(nc);
  const bool at_goal = (nr == goal_row_ && nc == goal_col_);
  result.reward = step_reward_ + (at_goal ? goal_reward_ : 0.0);
  result.done = at_goal;
  check_reward_bound(*this, result.reward);
  return result;
}

double Gridworld::reward_bound() const {
  return std::abs(step_reward_) + std::abs(goal_reward_);
}

namespace {
// Published car-on-a-hill constants.
constexpr double kMcMinPos = -1.2;
constexpr double kMcMaxPos = 0.6;
constexpr double kMcMaxVel = 0.07;
constexpr double kMcGravity = 0.0025;
constexpr double kMcForceDiscrete = 0.001;
constexpr double kMcForceContinuous = 0.0015;
constexpr double kMcGoalDiscrete = 0.5;
constexpr double kMcGoalContinuous = 0.45;
}  // namespace

MountainCar::MountainCar(bool discrete_actions, int position_bins,
                         int velocity_bins)
    : discrete_(discrete_actions) {
  disc_ = Discretizer({
      {kMcMinPos, kMcMaxPos, position_bins},
      {-kMcMaxVel, kMcMaxVel, velocity_bins},
  });
  actions_.discrete = discrete_;
  actions_.action_dim = 1;
  if (discrete_) {
    actions_.num_actions = 3;
  } else {
    actions_.low = Vec::Constant(1, -1.0);
    actions_.high = Vec::Constant(1, 1.0);
  }
}

Vec MountainCar::reset(Rng& rng) const {
  Vec state(2);
  state << uniform_double(rng, -0.6, -0.4), 0.0;
  return state;
}

StepResult MountainCar::step(const Vec& state, const Action& action, int,
                             Rng&) const {
  check_action(action);
  const double pos = state[0];
  double vel = state[1];
  double force;
  if (discrete_) {
    force = (action.index() - 1) * kMcForceDiscrete;
  } else {
    force = std::clamp(action.values[0], -1.0, 1.0) * kMcForceContinuous;
  }
  vel += force - kMcGravity * std::cos(3.0 * pos);
  vel = std::clamp(vel, -kMcMaxVel, kMcMaxVel);
  double new_pos = std::clamp(pos + vel, kMcMinPos, kMcMaxPos);
  if (new_pos <= kMcMinPos && vel < 0.0) vel = 0.0;  // inelastic left wall

  StepResult result;
  result.next_state = Vec(2);
  result.next_state << new_pos, vel;
  const double goal = discrete_ ? kMcGoalDiscrete : kMcGoalContinuous;
  result.done = new_pos >= goal;
  if (discrete_) {
    result.reward = -1.0;
  } else {
    const double a = std::clamp(action.values[0], -1.0, 1.0);
    result.reward = -0.1 * a * a + (result.done ? 100.0 : 0.0);
  }
  check_reward_bound(*this, result.reward);
  return result;
}

namespace {
constexpr double kPendulumG = 10.0;
constexpr double kPendulumMass = 1.0;
constexpr double kPendulumLength = 1.0;
constexpr double kPendulumDt = 0.05;
constexpr double kPendulumMaxSpeed = 8.0;
constexpr double kPendulumMaxTorque = 2.0;
constexpr double kPi = 3.14159265358979323846;

double angle_normalize(double x) {
  // wrap to (-pi, pi]
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y < 0) y += 2.0 * kPi;
  return y - kPi;
}
}  // namespace

Pendulum::Pendulum(bool discrete_actions, int bins_per_dim)
    : discrete_(discrete_actions) {
  disc_ = Discretizer({
      {-1.0, 1.0, bins_per_dim},
      {-1.0, 1.0, bins_per_dim},
      {-kPendulumMaxSpeed, kPendulumMaxSpeed, bins_per_dim},
  });
  actions_.discrete = discrete_;
  actions_.action_dim = 1;
  if (discrete_) {
    actions_.num_actions = 3;  // torques {-2, 0, 2}
  } else {
    actions_.low = Vec::Constant(1, -kPendulumMaxTorque);
    actions_.high = Vec::Constant(1, kPendulumMaxTorque);
  }
}

Vec Pendulum::reset(Rng& rng) const {
  const double th = uniform_double(rng, -kPi, kPi);
  const double thdot = uniform_double(rng, -1.0, 1.0);
  Vec state(3);
  state << std::cos(th), std::sin(th), thdot;
  return state;
}

StepResult Pendulum::step(const Vec& state, const Action& action, int,
                          Rng&) const {
  check_action(action);
  const double th = std::atan2(state[1], state[0]);
  const double thdot = state[2];
  double u;
  if (discrete_) {
    u = (action.index() - 1) * kPendulumMaxTorque;  // {-2, 0, 2}
  } else {
    u = std::clamp(action.values[0], -kPendulumMaxTorque, kPendulumMaxTorque);
  }
  const double cost = angle_normalize(th) * angle_normalize(th) +
                      0.1 * thdot * thdot + 0.001 * u * u;
  const double g = kPendulumG, m = kPendulumMass, l = kPendulumLength;
  double new_thdot =
      thdot + (3.0 * g / (2.0 * l) * std::sin(th) + 3.0 / (m * l * l) * u) *
                  kPendulumDt;
  new_thdot = std::clamp(new_thdot, -kPendulumMaxSpeed, kPendulumMaxSpeed);
  const double new_th = th + new_thdot * kPendulumDt;

  StepResult result;
  result.next_state = Vec(3);
  result.next_state << std::cos(new_th), std::sin(new_th), new_thdot;
  result.reward = -cost;
  result.done = false;  // fixed horizon
  check_reward_bound(*this, result.reward);
  return result;
}

void WirelessConfig::validate() const {
  if (channels != 2) {
    throw std::invalid_argument("WirelessConfig: only 2 channels supported");
  }
  if (packet_arrival_period < 1) {
    throw std::invalid_argument("WirelessConfig: arrival period must be >= 1");
  }
  if (queue_capacity < 1 || battery_capacity < 1) {
    throw std::invalid_argument("WirelessConfig: capacities must be >= 1");
  }
  if (harvest_probability < 0 || harvest_probability > 1 ||
      occupancy_probability < 0 || occupancy_probability > 1) {
    throw std::invalid_argument("WirelessConfig: probabilities must be in [0, 1]");
  }
  if (loss_fraction_when_occupied < 0 || loss_fraction_when_occupied > 1) {
    throw std::invalid_argument("WirelessConfig: loss fraction must be in [0, 1]");
  }
  if (battery_weight < 0 || queue_weight < 0) {
    throw std::invalid_argument("WirelessConfig: reward weights must be >= 0");
  }
  if (fading_levels.empty() || noise_power <= 0 || max_power <= 0) {
    throw std::invalid_argument("WirelessConfig: bad channel parameters");
  }
  for (double h : fading_levels) {
    if (h <= 0) throw std::invalid_argument("WirelessConfig: fading levels must be > 0");
  }
}

Wireless::Wireless(WirelessConfig config) : config_(std::move(config)) {
  config_.validate();
  const double h_min = *std::min_element(config_.fading_levels.begin(),
                                         config_.fading_levels.end());
  const double h_max = *std::max_element(config_.fading_levels.begin(),
                                         config_.fading_levels.end());
  const int hbins = std::min<int>(config_.bins_per_continuous_dim,
                                  static_cast<int>(config_.fading_levels.size()));
  // State layout: (h1, h2, occ1, occ2, battery, queue).
  disc_ = Discretizer({
      {h_min, h_max + 1e-9, hbins},
      {h_min, h_max + 1e-9, hbins},
      {0.0, 1.0, 2},
      {0.0, 1.0, 2},
      {0.0, config_.battery_capacity, config_.bins_per_continuous_dim},
      {0.0, config_.queue_capacity, config_.bins_per_continuous_dim},
  });
  actions_.discrete = false;
  actions_.action_dim = config_.channels;
  actions_.low = Vec::Zero(config_.channels);
  actions_.high = Vec::Constant(config_.channels, config_.max_power);
}

double Wireless::draw_fading(Rng& rng) const {
  const int n = static_cast<int>(config_.fading_levels.size());
  return config_.fading_levels[static_cast<std::size_t>(uniform_int(rng, n))];
}

Vec Wireless::reset(Rng& rng) const {
  Vec state(6);
  state[0] = draw_fading(rng);
  state[1] = draw_fading(rng);
  state[2] = (uniform_double(rng) < config_.occupancy_probability) ? 1.0 : 0.0;
  state[3] = (uniform_double(rng) < config_.occupancy_probability) ? 1.0 : 0.0;
  state[4] = config_.battery_capacity;  // full battery
  state[5] = 0.0;                       // empty queue
  return state;
}

StepResult Wireless::step(const Vec& state, const Action& action, int t,
                          Rng& rng) const {
  check_action(action);
  const double battery = state[4];
  double queue = state[5];

  // Requested powers, clamped to the action box, then scaled down if the
  // battery cannot cover the total.
  Vec power(config_.channels);
  for (int c = 0; c < config_.channels; ++c) {
    power[c] = std::clamp(action.values[c], 0.0, config_.max_power);
  }
  double total_power = power.sum();
  if (total_power > battery && total_power > 0.0) {
    power *= battery / total_power;
    total_power = battery;
  }

  // Arrival bursts land at the start of every period-th step (t = 0, T, 2T, ...).
  if (t % config_.packet_arrival_period == 0) {
    queue = std::min(queue + config_.packets_per_arrival, config_.queue_capacity);
  }

  // Shannon capacity per channel, in packet units; an occupied channel
  // loses loss_fraction of the transmitted packets.
  double deliverable = 0.0;
  for (int c = 0; c < config_.channels; ++c) {
    const double h = state[c];
    const double occupied = state[2 + c];
    double rate = std::log2(1.0 + power[c] * h / config_.noise_power);
    if (occupied > 0.5) rate *= 1.0 - config_.loss_fraction_when_occupied;
    deliverable += rate;
  }
  const double delivered = std::min(deliverable, queue);
  const double new_queue = queue - delivered;

  const double harvested =
      (uniform_double(rng) < config_.harvest_probability) ? 1.0 : 0.0;
  const double new_battery =
      std::clamp(battery - total_power + harvested, 0.0, config_.battery_capacity);

  StepResult result;
  result.next_state = Vec(6);
  result.next_state[0] = draw_fading(rng);
  result.next_state[1] = draw_fading(rng);
  result.next_state[2] =
      (uniform_double(rng) < config_.occupancy_probability) ? 1.0 : 0.0;
  result.next_state[3] =
      (uniform_double(rng) < config_.occupancy_probability) ? 1.0 : 0.0;
  result.next_state[4] = new_battery;
  result.next_state[5] = new_queue;
  result.reward =
      config_.battery_weight * new_battery - config_.queue_weight * new_queue;
  result.done = false;

  // Conservation sanity: queue and battery never leave their boxes and only
  // change through the accounted flows.
  if (new_queue < -1e-9 || new_queue > config_.queue_capacity + 1e-9 ||
      new_battery < -1e-9 || new_battery > config_.battery_capacity + 1e-9) {
    throw std::logic_error("wireless: conservation violated");
  }
  check_reward_bound(*this, result.reward);
  return result;
}

double Wireless::reward_bound() const {
  return config_.battery_weight * config_.battery_capacity +
         config_.queue_weight * config_.queue_capacity;
}

std::unique_ptr<Environment> make_env(const nlohmann::json& spec) {
  const std::string name = spec.at("name").get<std::string>();
  if (name == "gridworld") {
    const int rows = spec.value("rows", 5);
    const int cols = spec.value("cols", 5);
    return std::make_unique<Gridworld>(
        rows, cols, spec.value("goal_row", rows - 1),
        spec.value("goal_col", cols - 1), spec.value("step_reward", -1.0),
        spec.value("goal_reward", 10.0), spec.value("slip_prob", 0.0));
  }
  if (name == "mountaincar" || name == "mountaincar_continuous") {
    return std::make_unique<MountainCar>(name == "mountaincar",
                                         spec.value("position_bins", 20),
                                         spec.value("velocity_bins", 20));
  }
  if (name == "pendulum" || name == "pendulum_discrete") {
    return std::make_unique<Pendulum>(name == "pendulum_discrete",
                                      spec.value("bins_per_dim", 10));
  }
  if (name == "wireless") {
    WirelessConfig config;
    config.packet_arrival_period =
        spec.value("packet_arrival_period", config.packet_arrival_period);
    config.packets_per_arrival =
        spec.value("packets_per_arrival", config.packets_per_arrival);
    config.queue_capacity = spec.value("queue_capacity", config.queue_capacity);
    config.battery_capacity =
        spec.value("battery_capacity", config.battery_capacity);
    config.harvest_probability =
        spec.value("harvest_probability", config.harvest_probability);
    config.occupancy_probability =
        spec.value("occupancy_probability", config.occupancy_probability);
    if (spec.contains("fading_levels")) {
      config.fading_levels = spec.at("fading_levels").get<std::vector<double>>();
    }
    config.loss_fraction_when_occupied = spec.value(
        "loss_fraction_when_occupied", config.loss_fraction_when_occupied);
    config.battery_weight = spec.value("battery_weight", config.battery_weight);
    config.queue_weight = spec.value("queue_weight", config.queue_weight);
    config.noise_power = spec.value("noise_power", config.noise_power);
    config.max_power = spec.value("max_power", config.max_power);
    config.bins_per_continuous_dim =
        spec.value("bins_per_continuous_dim", config.bins_per_continuous_dim);
    return std::make_unique<Wireless>(config);
  }
  throw std::invalid_argument("make_env: unknown environment '" + name + "'");
}

}  // namespace tlr
