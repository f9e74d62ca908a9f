#include "tlr/policies.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tlr {
namespace {

// Running per-rank products of the selected factor rows over modes
// [0, upto). prefix.row(d) = elementwise product of rows 0..d-1, so
// prefix.row(0) is all ones and prefix.row(upto) is the full product.
Mat prefix_products(const ParafacModel& model, const MultiIndex& idx, int upto) {
  const int rank = model.rank();
  Mat prefix = Mat::Ones(upto + 1, rank);
  for (int d = 0; d < upto; ++d) {
    prefix.row(d + 1) =
        prefix.row(d).cwiseProduct(model.factor(d).row(idx[d]));
  }
  return prefix;
}

// suffix.row(d) = elementwise product of rows d..upto-1; suffix.row(upto)
// is all ones.
Mat suffix_products(const ParafacModel& model, const MultiIndex& idx, int upto) {
  const int rank = model.rank();
  Mat suffix = Mat::Ones(upto + 1, rank);
  for (int d = upto - 1; d >= 0; --d) {
    suffix.row(d) = model.factor(d).row(idx[d]).cwiseProduct(suffix.row(d + 1));
  }
  return suffix;
}

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

}  // namespace

GaussianPolicy::GaussianPolicy(ParafacModel means, double sigma, int action_dim)
    : means_(std::move(means)), sigma_(sigma), action_dim_(action_dim) {
  if (!(sigma_ > 0.0)) {
    throw std::invalid_argument("GaussianPolicy: sigma must be positive");
  }
  if (action_dim_ < 1) {
    throw std::invalid_argument("GaussianPolicy: action_dim must be >= 1");
  }
  const int num_modes = means_.num_modes();
  if (action_dim_ == 1) {
    state_modes_ = num_modes;
  } else {
    state_modes_ = num_modes - 1;
    if (state_modes_ < 1 || means_.shape().dim(num_modes - 1) != action_dim_) {
      throw std::invalid_argument(
          "GaussianPolicy: multi-dim actions need a trailing mode of size P");
    }
  }
  if (state_modes_ < 1) {
    throw std::invalid_argument("GaussianPolicy: need at least one state mode");
  }
}

void GaussianPolicy::check_state(const MultiIndex& state_idx) const {
  if (static_cast<int>(state_idx.size()) != state_modes_) {
    throw std::invalid_argument("GaussianPolicy: state index has wrong length");
  }
  for (int d = 0; d < state_modes_; ++d) {
    if (state_idx[d] < 0 || state_idx[d] >= means_.shape().dim(d)) {
      throw std::out_of_range("GaussianPolicy: state index out of range");
    }
  }
}

Vec GaussianPolicy::mean(const MultiIndex& state_idx) const {
  check_state(state_idx);
  if (action_dim_ == 1) {
    return Vec::Constant(1, means_.entry(state_idx));
  }
  return means_.fiber_last_mode(state_idx);
}

Action GaussianPolicy::sample(const MultiIndex& state_idx, Rng& rng) const {
  Vec mu = mean(state_idx);
  Action act;
  act.values = Vec(action_dim_);
  for (int p = 0; p < action_dim_; ++p) {
    act.values[p] = mu[p] + sigma_ * normal_double(rng);
  }
  return act;
}

double GaussianPolicy::log_prob(const MultiIndex& state_idx,
                                const Action& action) const {
  if (action.values.size() != action_dim_) {
    throw std::invalid_argument("GaussianPolicy: action has wrong dimension");
  }
  Vec mu = mean(state_idx);
  double lp = 0.0;
  for (int p = 0; p < action_dim_; ++p) {
    const double z = (action.values[p] - mu[p]) / sigma_;
    lp += -0.5 * (kLogTwoPi + z * z) - std::log(sigma_);
  }
  return lp;
}

ScoreVector GaussianPolicy::score(const MultiIndex& state_idx,
                                  const Action& action) const {
  Vec mu = mean(state_idx);
  if (action.values.size() != action_dim_) {
    throw std::invalid_argument("GaussianPolicy: action has wrong dimension");
  }
  const int rank = means_.rank();
  const double inv_var = 1.0 / (sigma_ * sigma_);

  ScoreVector sv(layout());
  const Mat prefix = prefix_products(means_, state_idx, state_modes_);
  const Mat suffix = suffix_products(means_, state_idx, state_modes_);

  if (action_dim_ == 1) {
    const double coef = (action.values[0] - mu[0]) * inv_var;
    for (int d = 0; d < state_modes_; ++d) {
      for (int k = 0; k < rank; ++k) {
        sv.add(d, state_idx[d], k, coef * prefix(d, k) * suffix(d + 1, k));
      }
    }
    return sv;
  }

  // P > 1: the trailing mode indexes the action dimension. Each state-mode
  // row aggregates all P chain-rule terms; the action mode gets one row per
  // dimension, weighted by the full state product.
  const Mat& act_factor = means_.factor(state_modes_);
  Vec coef(action_dim_);
  for (int p = 0; p < action_dim_; ++p) {
    coef[p] = (action.values[p] - mu[p]) * inv_var;
  }
  const Vec weighted = act_factor.transpose() * coef;  // Σ_p coef_p f_P(p, ·)
  for (int d = 0; d < state_modes_; ++d) {
    for (int k = 0; k < rank; ++k) {
      sv.add(d, state_idx[d], k, weighted[k] * prefix(d, k) * suffix(d + 1, k));
    }
  }
  for (int p = 0; p < action_dim_; ++p) {
    for (int k = 0; k < rank; ++k) {
      sv.add(state_modes_, p, k, coef[p] * prefix(state_modes_, k));
    }
  }
  return sv;
}

FactorLayout GaussianPolicy::layout() const {
  return FactorLayout(means_.shape().dims(), means_.rank());
}

GaussianPolicy GaussianPolicy::with_factors(std::vector<Mat> factors) const {
  // The model constructor validates shapes and finiteness.
  return GaussianPolicy(
      ParafacModel(means_.shape(), means_.rank(), std::move(factors)), sigma_,
      action_dim_);
}

GaussianPolicy GaussianPolicy::with_sigma(double sigma) const {
  return GaussianPolicy(means_, sigma, action_dim_);
}

SoftmaxPolicy::SoftmaxPolicy(ParafacModel logits, double temperature,
                             int action_dim)
    : logits_(std::move(logits)),
      temperature_(temperature),
      action_dim_(action_dim) {
  if (temperature_ < 0.0) {
    throw std::invalid_argument("SoftmaxPolicy: temperature must be >= 0");
  }
  if (action_dim_ < 1) {
    throw std::invalid_argument("SoftmaxPolicy: action_dim must be >= 1");
  }
  const int num_modes = logits_.num_modes();
  const int extra = (action_dim_ == 1) ? 1 : 2;
  state_modes_ = num_modes - extra;
  if (state_modes_ < 1) {
    throw std::invalid_argument("SoftmaxPolicy: need at least one state mode");
  }
  num_actions_ = logits_.shape().dim(num_modes - 1);
  if (num_actions_ < 1) {
    throw std::invalid_argument("SoftmaxPolicy: need at least one action");
  }
  if (action_dim_ > 1 && logits_.shape().dim(state_modes_) != action_dim_) {
    throw std::invalid_argument(
        "SoftmaxPolicy: multi-dim actions need a mode of size P before the "
        "action mode");
  }
}

void SoftmaxPolicy::check_state(const MultiIndex& state_idx) const {
  if (static_cast<int>(state_idx.size()) != state_modes_) {
    throw std::invalid_argument("SoftmaxPolicy: state index has wrong length");
  }
  for (int d = 0; d < state_modes_; ++d) {
    if (state_idx[d] < 0 || state_idx[d] >= logits_.shape().dim(d)) {
      throw std::out_of_range("SoftmaxPolicy: state index out of range");
    }
  }
}

Vec SoftmaxPolicy::logits_fiber(const MultiIndex& state_idx, int dim) const {
  if (action_dim_ == 1) {
    return logits_.fiber_last_mode(state_idx);
  }
  MultiIndex prefix = state_idx;
  prefix.push_back(dim);
  return logits_.fiber_last_mode(prefix);
}

Vec SoftmaxPolicy::probs(const MultiIndex& state_idx, int dim) const {
  check_state(state_idx);
  if (dim < 0 || dim >= action_dim_) {
    throw std::out_of_range("SoftmaxPolicy: action dimension out of range");
  }
  Vec y = temperature_ * logits_fiber(state_idx, dim);
  const double m = y.maxCoeff();
  Vec e = (y.array() - m).exp();
  return e / e.sum();
}

Action SoftmaxPolicy::sample(const MultiIndex& state_idx, Rng& rng) const {
  Action act;
  act.discrete = true;
  act.values = Vec(action_dim_);
  for (int p = 0; p < action_dim_; ++p) {
    const Vec pr = probs(state_idx, p);
    const double u = uniform_double(rng);
    double cum = 0.0;
    int chosen = num_actions_ - 1;  // guards against cum < 1 from rounding
    for (int b = 0; b < num_actions_; ++b) {
      cum += pr[b];
      if (u < cum) {
        chosen = b;
        break;
      }
    }
    act.values[p] = static_cast<double>(chosen);
  }
  return act;
}

double SoftmaxPolicy::log_prob(const MultiIndex& state_idx,
                               const Action& action) const {
  if (action.values.size() != action_dim_) {
    throw std::invalid_argument("SoftmaxPolicy: action has wrong dimension");
  }
  double lp = 0.0;
  for (int p = 0; p < action_dim_; ++p) {
    const int a = action.index(p);
    if (a < 0 || a >= num_actions_) {
      throw std::out_of_range("SoftmaxPolicy: action index out of range");
    }
    // log softmax, stabilized the same way as probs()
    Vec y = temperature_ * logits_fiber(state_idx, p);
    const double m = y.maxCoeff();
    const double lse = std::log((y.array() - m).exp().sum()) + m;
    lp += y[a] - lse;
  }
  return lp;
}

ScoreVector SoftmaxPolicy::score(const MultiIndex& state_idx,
                                 const Action& action) const {
  check_state(state_idx);
  if (action.values.size() != action_dim_) {
    throw std::invalid_argument("SoftmaxPolicy: action has wrong dimension");
  }
  const int rank = logits_.rank();
  const int C = num_actions_;
  ScoreVector sv(layout());

  const Mat prefix = prefix_products(logits_, state_idx, state_modes_);
  const Mat suffix = suffix_products(logits_, state_idx, state_modes_);
  const Mat& act_factor = logits_.factor(logits_.num_modes() - 1);  // C x K

  if (action_dim_ == 1) {
    const Vec pr = probs(state_idx, 0);
    const int a = action.index(0);
    if (a < 0 || a >= C) {
      throw std::out_of_range("SoftmaxPolicy: action index out of range");
    }
    // coef_b = β (1{a=b} - π_b); the β factor makes this the true gradient
    // of log_prob, which scales the logits by β before the softmax.
    Vec coef = -temperature_ * pr;
    coef[a] += temperature_;
    const Vec contracted = act_factor.transpose() * coef;  // Σ_b coef_b f_C(b,·)
    for (int d = 0; d < state_modes_; ++d) {
      for (int k = 0; k < rank; ++k) {
        sv.add(d, state_idx[d], k,
               contracted[k] * prefix(d, k) * suffix(d + 1, k));
      }
    }
    for (int b = 0; b < C; ++b) {
      for (int k = 0; k < rank; ++k) {
        sv.add(state_modes_, b, k, coef[b] * prefix(state_modes_, k));
      }
    }
    return sv;
  }

  // P > 1: modes are [states..., P, C]. Sum the chain-rule terms over the
  // action dimensions; only the P-mode rows stay per-dimension.
  const Mat& dim_factor = logits_.factor(state_modes_);  // P x K
  Mat coefs(action_dim_, C);
  for (int p = 0; p < action_dim_; ++p) {
    const Vec pr = probs(state_idx, p);
    const int a = action.index(p);
    if (a < 0 || a >= C) {
      throw std::out_of_range("SoftmaxPolicy: action index out of range");
    }
    coefs.row(p) = (-temperature_ * pr).transpose();
    coefs(p, a) += temperature_;
  }
  const Mat contracted = coefs * act_factor;  // P x K, Σ_b coef^p_b f_C(b,·)
  const Vec state_weight =
      (contracted.array() * dim_factor.array()).colwise().sum().transpose();
  for (int d = 0; d < state_modes_; ++d) {
    for (int k = 0; k < rank; ++k) {
      sv.add(d, state_idx[d], k,
             state_weight[k] * prefix(d, k) * suffix(d + 1, k));
    }
  }
  for (int p = 0; p < action_dim_; ++p) {
    for (int k = 0; k < rank; ++k) {
      sv.add(state_modes_, p, k, contracted(p, k) * prefix(state_modes_, k));
    }
  }
  const Mat cmode = coefs.transpose() * dim_factor;  // C x K, Σ_p coef^p_b f_P(p,·)
  for (int b = 0; b < C; ++b) {
    for (int k = 0; k < rank; ++k) {
      sv.add(state_modes_ + 1, b, k, cmode(b, k) * prefix(state_modes_, k));
    }
  }
  return sv;
}

FactorLayout SoftmaxPolicy::layout() const {
  return FactorLayout(logits_.shape().dims(), logits_.rank());
}

SoftmaxPolicy SoftmaxPolicy::with_factors(std::vector<Mat> factors) const {
  return SoftmaxPolicy(
      ParafacModel(logits_.shape(), logits_.rank(), std::move(factors)),
      temperature_, action_dim_);
}

SoftmaxPolicy SoftmaxPolicy::with_temperature(double temperature) const {
  return SoftmaxPolicy(logits_, temperature, action_dim_);
}

Action policy_sample(const AnyPolicy& policy, const MultiIndex& state_idx,
                     Rng& rng) {
  return std::visit([&](const auto& p) { return p.sample(state_idx, rng); },
                    policy);
}

double policy_log_prob(const AnyPolicy& policy, const MultiIndex& state_idx,
                       const Action& action) {
  return std::visit(
      [&](const auto& p) { return p.log_prob(state_idx, action); }, policy);
}

ScoreVector policy_score(const AnyPolicy& policy, const MultiIndex& state_idx,
                         const Action& action) {
  return std::visit([&](const auto& p) { return p.score(state_idx, action); },
                    policy);
}

FactorLayout policy_layout(const AnyPolicy& policy) {
  return std::visit([](const auto& p) { return p.layout(); }, policy);
}

const ParafacModel& policy_model(const AnyPolicy& policy) {
  if (const auto* g = std::get_if<GaussianPolicy>(&policy)) return g->means();
  return std::get<SoftmaxPolicy>(policy).logits();
}

AnyPolicy policy_with_factors(const AnyPolicy& policy, std::vector<Mat> factors) {
  return std::visit(
      [&](const auto& p) -> AnyPolicy { return p.with_factors(std::move(factors)); },
      policy);
}

bool policy_is_discrete(const AnyPolicy& policy) {
  return std::holds_alternative<SoftmaxPolicy>(policy);
}

Action policy_greedy_action(const AnyPolicy& policy, const MultiIndex& state_idx) {
  if (const auto* g = std::get_if<GaussianPolicy>(&policy)) {
    Action act;
    act.values = g->mean(state_idx);
    return act;
  }
  const auto& s = std::get<SoftmaxPolicy>(policy);
  Action act;
  act.discrete = true;
  act.values = Vec(s.action_dim());
  for (int p = 0; p < s.action_dim(); ++p) {
    int best = 0;
    const Vec pr = s.probs(state_idx, p);
    pr.maxCoeff(&best);
    act.values[p] = static_cast<double>(best);
  }
  return act;
}

double kl_divergence(const AnyPolicy& old_policy, const AnyPolicy& new_policy,
                     const MultiIndex& state_idx) {
  if (old_policy.index() != new_policy.index()) {
    throw std::invalid_argument("kl_divergence: policy families differ");
  }
  if (const auto* g_old = std::get_if<GaussianPolicy>(&old_policy)) {
    const auto& g_new = std::get<GaussianPolicy>(new_policy);
    if (!(g_old->means().shape() == g_new.means().shape()) ||
        g_old->action_dim() != g_new.action_dim()) {
      throw std::invalid_argument("kl_divergence: policy shapes differ");
    }
    const Vec mu0 = g_old->mean(state_idx);
    const Vec mu1 = g_new.mean(state_idx);
    const double s0 = g_old->sigma();
    const double s1 = g_new.sigma();
    double kl = 0.0;
    for (int p = 0; p < g_old->action_dim(); ++p) {
      const double diff = mu0[p] - mu1[p];
      kl += std::log(s1 / s0) + (s0 * s0 + diff * diff) / (2.0 * s1 * s1) - 0.5;
    }
    return kl;
  }
  const auto& s_old = std::get<SoftmaxPolicy>(old_policy);
  const auto& s_new = std::get<SoftmaxPolicy>(new_policy);
  if (!(s_old.logits().shape() == s_new.logits().shape()) ||
      s_old.action_dim() != s_new.action_dim()) {
    throw std::invalid_argument("kl_divergence: policy shapes differ");
  }
  double kl = 0.0;
  for (int p = 0; p < s_old.action_dim(); ++p) {
    const Vec pr = s_old.probs(state_idx, p);
    const Vec qr = s_new.probs(state_idx, p);
    for (int b = 0; b < s_old.num_actions(); ++b) {
      if (pr[b] > 0.0) kl += pr[b] * std::log(pr[b] / qr[b]);
    }
  }
  return kl;
}

namespace {

ParafacModel random_model(const TensorShape& shape, int rank, Rng& rng,
                          double scale, double lo, double hi) {
  std::vector<Mat> factors;
  factors.reserve(static_cast<std::size_t>(shape.num_modes()));
  for (int d = 0; d < shape.num_modes(); ++d) {
    Mat f(shape.dim(d), rank);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) {
        f(i, k) = scale * uniform_double(rng, lo, hi);
      }
    }
    factors.push_back(std::move(f));
  }
  return ParafacModel(shape, rank, std::move(factors));
}

}  // namespace

ParafacModel random_policy_model(const TensorShape& shape, int rank, Rng& rng) {
  const double scale =
      std::pow(static_cast<double>(rank), -1.0 / shape.num_modes());
  return random_model(shape, rank, rng, scale, 0.5, 1.5);
}

ParafacModel random_critic_model(const TensorShape& shape, int rank, Rng& rng,
                                 double scale) {
  const double base =
      std::pow(static_cast<double>(rank), -1.0 / shape.num_modes());
  return random_model(shape, rank, rng, scale * base, -0.5, 0.5);
}

namespace {

constexpr char kCheckpointMagic[4] = {'T', 'L', 'R', 'P'};

void write_factors(std::ostream& out, const ParafacModel& model) {
  for (const auto& factor : model.factors()) {
    for (Eigen::Index i = 0; i < factor.rows(); ++i) {
      for (Eigen::Index k = 0; k < factor.cols(); ++k) {
        const double v = factor(i, k);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
    }
  }
}

ParafacModel read_factors(std::istream& in, const TensorShape& shape, int rank) {
  std::vector<Mat> factors;
  factors.reserve(static_cast<std::size_t>(shape.num_modes()));
  for (int d = 0; d < shape.num_modes(); ++d) {
    Mat factor(shape.dim(d), rank);
    for (Eigen::Index i = 0; i < factor.rows(); ++i) {
      for (Eigen::Index k = 0; k < factor.cols(); ++k) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        factor(i, k) = v;
      }
    }
    factors.push_back(std::move(factor));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated factor data");
  return ParafacModel(shape, rank, std::move(factors));
}

void save_checkpoint(const nlohmann::json& header, const ParafacModel& model,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  const std::string header_str = header.dump();
  const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
  out.write(kCheckpointMagic, 4);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), header_str.size());
  write_factors(out, model);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::pair<nlohmann::json, ParafacModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(header_str);
  TensorShape shape(header.at("dims").get<std::vector<int>>());
  const int rank = header.at("rank").get<int>();
  ParafacModel model = read_factors(in, shape, rank);
  return {std::move(header), std::move(model)};
}

}  // namespace

void save_policy_checkpoint(const AnyPolicy& policy, const std::string& path) {
  nlohmann::json header;
  if (const auto* g = std::get_if<GaussianPolicy>(&policy)) {
    header["family"] = "gaussian";
    header["dims"] = g->means().shape().dims();
    header["rank"] = g->means().rank();
    header["sigma"] = g->sigma();
    header["action_dim"] = g->action_dim();
    save_checkpoint(header, g->means(), path);
    return;
  }
  const auto& s = std::get<SoftmaxPolicy>(policy);
  header["family"] = "softmax";
  header["dims"] = s.logits().shape().dims();
  header["rank"] = s.logits().rank();
  header["temperature"] = s.temperature();
  header["action_dim"] = s.action_dim();
  header["num_actions"] = s.num_actions();
  save_checkpoint(header, s.logits(), path);
}

AnyPolicy load_policy_checkpoint(const std::string& path) {
  auto [header, model] = load_checkpoint(path);
  const std::string family = header.at("family").get<std::string>();
  if (family == "gaussian") {
    return GaussianPolicy(std::move(model), header.at("sigma").get<double>(),
                          header.at("action_dim").get<int>());
  }
  if (family == "softmax") {
    return SoftmaxPolicy(std::move(model),
                         header.at("temperature").get<double>(),
                         header.at("action_dim").get<int>());
  }
  throw std::runtime_error("checkpoint: unknown policy family '" + family + "'");
}

void save_critic_checkpoint(const ParafacModel& vf, const std::string& path) {
  nlohmann::json header;
  header["family"] = "critic";
  header["dims"] = vf.shape().dims();
  header["rank"] = vf.rank();
  save_checkpoint(header, vf, path);
}

ParafacModel load_critic_checkpoint(const std::string& path) {
  auto [header, model] = load_checkpoint(path);
  if (header.at("family").get<std::string>() != "critic") {
    throw std::runtime_error("checkpoint: not a critic checkpoint: " + path);
  }
  return model;
}

}  // namespace tlr
