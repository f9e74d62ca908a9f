#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "oracles.hpp"
#include "tlr/policies.hpp"
#include "tlr/rng.hpp"
#include "tlr/score.hpp"

using namespace tlr;

namespace {

ParafacModel random_model(const TensorShape& shape, int rank, Rng& rng,
                          double lo = -1.0, double hi = 1.0) {
  std::vector<Mat> factors;
  for (int d = 0; d < shape.num_modes(); ++d) {
    Mat f(shape.dim(d), rank);
    for (int i = 0; i < f.rows(); ++i)
      for (int k = 0; k < f.cols(); ++k) f(i, k) = uniform_double(rng, lo, hi);
    factors.push_back(std::move(f));
  }
  return ParafacModel(shape, rank, std::move(factors));
}

// Finite-difference gradient of log_prob w.r.t. the flattened factor vector,
// rebuilt through with_factors so every entry is perturbed independently.
template <typename Policy>
Vec fd_log_prob_gradient(const Policy& policy, const MultiIndex& state,
                         const Action& action, double step = 1e-5) {
  const FactorLayout layout = policy.layout();
  const Vec base = layout.flatten(
      [&]() -> const ParafacModel& {
        if constexpr (std::is_same_v<Policy, GaussianPolicy>)
          return policy.means();
        else
          return policy.logits();
      }());
  auto f = [&](const Vec& params) {
    const Policy moved = policy.with_factors(layout.unflatten(params));
    return moved.log_prob(state, action);
  };
  return oracle::fd_gradient(f, base, step);
}

MultiIndex random_state(const TensorShape& shape, int state_modes, Rng& rng) {
  MultiIndex idx(state_modes);
  for (int d = 0; d < state_modes; ++d)
    idx[d] = uniform_int(rng, shape.dim(d));
  return idx;
}

}  // namespace

// --- Gaussian mean / sample / log_prob ------------------------------------

TEST_CASE("gaussian mean: all-ones K=1 D=2 model gives 1") {
  const GaussianPolicy policy(ParafacModel::constant(TensorShape({3, 3}), 1, 1.0), 0.5);
  CHECK(policy.mean({1, 2})[0] == 1.0);
}

TEST_CASE("gaussian mean: equals the tensor entry on random models") {
  Rng rng = make_rng(31);
  const TensorShape shape({3, 4, 2});
  const ParafacModel means = random_model(shape, 2, rng);
  const GaussianPolicy policy(means, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 2; ++k)
        CHECK(policy.mean({i, j, k})[0] == doctest::Approx(means.entry({i, j, k})).epsilon(1e-15));
}

TEST_CASE("gaussian mean: zero factors give 0") {
  const GaussianPolicy policy(ParafacModel::constant(TensorShape({2, 2}), 2, 0.0), 1.0);
  CHECK(policy.mean({0, 1})[0] == 0.0);
}

TEST_CASE("gaussian mean: P=2 returns the action-mode fiber") {
  Rng rng = make_rng(32);
  const TensorShape shape({3, 4, 2});  // last mode is the action dimension
  const ParafacModel means = random_model(shape, 2, rng);
  const GaussianPolicy policy(means, 1.0, 2);
  const Vec m = policy.mean({1, 2});
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(means.entry({1, 2, 0})).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(means.entry({1, 2, 1})).epsilon(1e-15));
}

TEST_CASE("gaussian sample: sigma ~ 0 collapses to the mean") {
  Rng rng = make_rng(33);
  const ParafacModel means = ParafacModel::constant(TensorShape({2}), 1, 0.7);
  const GaussianPolicy policy(means, 1e-30);
  const Action a = policy.sample({1}, rng);
  CHECK(std::abs(a.values[0] - 0.7) <= 1e-15);
}

TEST_CASE("gaussian sample: empirical mean and variance match over 1e5 draws") {
  Rng rng = make_rng(34);
  const double sigma = 0.8;
  const ParafacModel means = ParafacModel::constant(TensorShape({2}), 1, 1.5);
  const GaussianPolicy policy(means, sigma);

  const int n = 100000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = policy.sample({0}, rng).values[0];

  const double mean = oracle::mean(draws);
  const double var = oracle::variance(draws);
  CHECK(std::abs(mean - 1.5) <= 4.0 * sigma / std::sqrt(double(n)));
  CHECK(std::abs(var - sigma * sigma) <= 0.05 * sigma * sigma);
}

TEST_CASE("gaussian log_prob: at the mean with sigma 1 equals -log(2*pi)/2") {
  const ParafacModel means = ParafacModel::constant(TensorShape({2}), 1, 0.3);
  const GaussianPolicy policy(means, 1.0);
  CHECK(policy.log_prob({0}, Action::continuous_scalar(0.3)) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("gaussian log_prob: density integrates to 1 by quadrature") {
  const double sigma = 0.6;
  const ParafacModel means = ParafacModel::constant(TensorShape({2}), 1, -0.4);
  const GaussianPolicy policy(means, sigma);
  auto density = [&](double a) {
    return std::exp(policy.log_prob({1}, Action::continuous_scalar(a)));
  };
  // +-10 sigma around the mean captures all the mass we can see at 1e-6
  const double integral = oracle::simpson(density, -0.4 - 10 * sigma, -0.4 + 10 * sigma, 4000);
  CHECK(std::abs(integral - 1.0) <= 1e-6);
}

TEST_CASE("gaussian log_prob: pairwise differences follow the quadratic identity") {
  Rng rng = make_rng(35);
  const ParafacModel means = ParafacModel::constant(TensorShape({2}), 1, 0.2);
  const double sigma = 1.3;
  const GaussianPolicy policy(means, sigma);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = uniform_double(rng, -3, 3), b = uniform_double(rng, -3, 3);
    const double lhs = policy.log_prob({0}, Action::continuous_scalar(a)) -
                       policy.log_prob({0}, Action::continuous_scalar(b));
    const double rhs =
        ((b - 0.2) * (b - 0.2) - (a - 0.2) * (a - 0.2)) / (2 * sigma * sigma);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("gaussian policy: sigma <= 0 rejected") {
  const ParafacModel means = ParafacModel::constant(TensorShape({2}), 1, 0.0);
  CHECK_THROWS_AS(GaussianPolicy(means, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianPolicy(means, -1.0), std::invalid_argument);
}

// --- Gaussian score ---------------------------------------------------------

TEST_CASE("gaussian score: action at the mean gives an all-zero score") {
  Rng rng = make_rng(36);
  const ParafacModel means = random_model(TensorShape({3, 2}), 2, rng);
  const GaussianPolicy policy(means, 0.7);
  const MultiIndex state{2, 1};
  const Action at_mean = Action::continuous_scalar(policy.mean(state)[0]);
  const ScoreVector sv = policy.score(state, at_mean);
  CHECK(sv.densify().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian score: D=1 K=1 closed form (a - mu) / sigma^2") {
  Mat f(4, 1);
  f << 0.5, -0.2, 0.9, 0.1;
  const ParafacModel means(TensorShape({4}), 1, {f});
  const double sigma = 0.6;
  const GaussianPolicy policy(means, sigma);
  const double a = 1.1;
  const ScoreVector sv = policy.score({2}, Action::continuous_scalar(a));
  REQUIRE(sv.nonzeros() == 1);
  const auto& e = sv.entries()[0];
  CHECK(e.mode == 0);
  CHECK(e.row == 2);
  CHECK(e.col == 0);
  CHECK(e.value == doctest::Approx((a - 0.9) / (sigma * sigma)).epsilon(1e-12));
}

TEST_CASE("gaussian score: matches finite differences on random D=3 K=2 models") {
  Rng rng = make_rng(37);
  for (int trial = 0; trial < 25; ++trial) {
    const TensorShape shape({3, 2, 4});
    const ParafacModel means = random_model(shape, 2, rng, 0.2, 1.2);
    const GaussianPolicy policy(means, uniform_double(rng, 0.4, 1.5));
    const MultiIndex state = random_state(shape, 3, rng);
    const Action action = Action::continuous_scalar(uniform_double(rng, -2, 2));

    const Vec analytic = policy.score(state, action).densify();
    const Vec numeric = fd_log_prob_gradient(policy, state, action);
    CHECK(oracle::max_rel_error(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("gaussian score: P=2 actions match finite differences") {
  Rng rng = make_rng(38);
  for (int trial = 0; trial < 15; ++trial) {
    const TensorShape shape({3, 2, 2});  // two state modes + P=2 action mode
    const ParafacModel means = random_model(shape, 2, rng, 0.2, 1.2);
    const GaussianPolicy policy(means, uniform_double(rng, 0.4, 1.5), 2);
    const MultiIndex state = random_state(shape, 2, rng);
    Action action;
    action.values = Vec(2);
    action.values << uniform_double(rng, -2, 2), uniform_double(rng, -2, 2);

    const Vec analytic = policy.score(state, action).densify();
    const Vec numeric = fd_log_prob_gradient(policy, state, action);
    CHECK(oracle::max_rel_error(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("gaussian score: sparsity bounded by K(D + P) and dense length fixed") {
  Rng rng = make_rng(39);
  const TensorShape shape({3, 2, 4, 2});
  const int rank = 3;
  const ParafacModel means = random_model(shape, rank, rng, 0.2, 1.2);
  const GaussianPolicy policy(means, 1.0, 2);
  const MultiIndex state = random_state(shape, 3, rng);
  Action action;
  action.values = Vec(2);
  action.values << 0.3, -0.8;
  const ScoreVector sv = policy.score(state, action);
  CHECK(sv.nonzeros() <= static_cast<std::size_t>(rank * (3 + 2)));
  CHECK(sv.densify().size() == (3 + 2 + 4 + 2) * rank);
}

// --- softmax probs / sample / log_prob -------------------------------------

TEST_CASE("softmax probs: equal logits are uniform") {
  const SoftmaxPolicy policy(ParafacModel::constant(TensorShape({2, 4}), 1, 0.3), 1.0);
  const Vec p = policy.probs({1});
  for (int c = 0; c < 4; ++c) CHECK(p[c] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax probs: temperature 0 is uniform whatever the logits") {
  Rng rng = make_rng(40);
  const ParafacModel logits = random_model(TensorShape({3, 5}), 2, rng);
  const SoftmaxPolicy policy(logits, 0.0);
  const Vec p = policy.probs({2});
  for (int c = 0; c < 5; ++c) CHECK(p[c] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax probs: logits (0, ln 2) with beta 1 give (1/3, 2/3)") {
  Mat state_factor(1, 1), action_factor(2, 1);
  state_factor << 1.0;
  action_factor << 0.0, std::log(2.0);
  const ParafacModel logits(TensorShape({1, 2}), 1, {state_factor, action_factor});
  const SoftmaxPolicy policy(logits, 1.0);
  const Vec p = policy.probs({0});
  CHECK(p[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax probs: sum to 1 and stay nonnegative under extreme logits") {
  Mat state_factor(1, 1), action_factor(3, 1);
  state_factor << 1.0;
  action_factor << 700.0, -700.0, 0.0;  // would overflow exp without max-shift
  const ParafacModel logits(TensorShape({1, 3}), 1, {state_factor, action_factor});
  const SoftmaxPolicy policy(logits, 1.0);
  const Vec p = policy.probs({0});
  CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax sample: C=1 always returns action 0") {
  Rng rng = make_rng(41);
  const SoftmaxPolicy policy(ParafacModel::constant(TensorShape({2, 1}), 1, 0.4), 1.0);
  for (int i = 0; i < 100; ++i) CHECK(policy.sample({0}, rng).index() == 0);
}

TEST_CASE("softmax sample: empirical frequencies match probs within 3 sigma") {
  Rng rng = make_rng(42);
  const ParafacModel logits = random_model(TensorShape({2, 3}), 2, rng);
  const SoftmaxPolicy policy(logits, 1.0);
  const MultiIndex state{1};
  const Vec p = policy.probs(state);

  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[policy.sample(state, rng).index()];
  for (int c = 0; c < 3; ++c) {
    const double freq = counts[c] / double(n);
    CHECK(std::abs(freq - p[c]) <= 3.0 * std::sqrt(p[c] * (1 - p[c]) / n) + 1e-9);
  }
}

TEST_CASE("softmax sample: dominant logit wins every draw") {
  Rng rng = make_rng(43);
  Mat state_factor(1, 1), action_factor(2, 1);
  state_factor << 1.0;
  action_factor << 50.0, 0.0;
  const ParafacModel logits(TensorShape({1, 2}), 1, {state_factor, action_factor});
  const SoftmaxPolicy policy(logits, 1.0);
  for (int i = 0; i < 10000; ++i) CHECK(policy.sample({0}, rng).index() == 0);
}

TEST_CASE("softmax log_prob: log of the matching probability") {
  Rng rng = make_rng(44);
  const ParafacModel logits = random_model(TensorShape({2, 4}), 2, rng);
  const SoftmaxPolicy policy(logits, 1.3);
  const Vec p = policy.probs({1});
  for (int c = 0; c < 4; ++c)
    CHECK(policy.log_prob({1}, Action::discrete_scalar(c)) ==
          doctest::Approx(std::log(p[c])).epsilon(1e-12));
}

// --- softmax score ----------------------------------------------------------

TEST_CASE("softmax score: matches finite differences on random D=2 C=3 K=2 models") {
  Rng rng = make_rng(45);
  for (int trial = 0; trial < 25; ++trial) {
    const TensorShape shape({3, 2, 3});
    const ParafacModel logits = random_model(shape, 2, rng, 0.2, 1.2);
    const SoftmaxPolicy policy(logits, uniform_double(rng, 0.5, 2.0));
    const MultiIndex state = random_state(shape, 2, rng);
    const Action action = Action::discrete_scalar(uniform_int(rng, 3));

    const Vec analytic = policy.score(state, action).densify();
    const Vec numeric = fd_log_prob_gradient(policy, state, action);
    CHECK(oracle::max_rel_error(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("softmax score: P=2 action dimensions match finite differences") {
  Rng rng = make_rng(46);
  for (int trial = 0; trial < 15; ++trial) {
    const TensorShape shape({3, 2, 2, 3});  // states, P=2, C=3
    const ParafacModel logits = random_model(shape, 2, rng, 0.2, 1.2);
    const SoftmaxPolicy policy(logits, uniform_double(rng, 0.5, 2.0), 2);
    const MultiIndex state = random_state(shape, 2, rng);
    Action action;
    action.values = Vec(2);
    action.values << uniform_int(rng, 3), uniform_int(rng, 3);
    action.discrete = true;

    const Vec analytic = policy.score(state, action).densify();
    const Vec numeric = fd_log_prob_gradient(policy, state, action);
    CHECK(oracle::max_rel_error(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("softmax score: expected score under the policy is the zero vector") {
  Rng rng = make_rng(47);
  const TensorShape shape({3, 2, 4});
  const ParafacModel logits = random_model(shape, 2, rng, 0.2, 1.2);
  const SoftmaxPolicy policy(logits, 1.1);
  const MultiIndex state{2, 0};
  const Vec p = policy.probs(state);

  Vec expected = Vec::Zero(policy.layout().size());
  for (int a = 0; a < 4; ++a)
    policy.score(state, Action::discrete_scalar(a)).add_scaled_to(expected, p[a]);
  CHECK(expected.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("softmax score: C=1 gives the zero score") {
  const SoftmaxPolicy policy(ParafacModel::constant(TensorShape({2, 1}), 1, 0.5), 1.0);
  const ScoreVector sv = policy.score({1}, Action::discrete_scalar(0));
  CHECK(sv.densify().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("softmax score: sparsity bounded by K(D + C) and dense length fixed") {
  Rng rng = make_rng(48);
  const TensorShape shape({3, 2, 4});
  const int rank = 3;
  const ParafacModel logits = random_model(shape, rank, rng, 0.2, 1.2);
  const SoftmaxPolicy policy(logits, 1.0);
  const ScoreVector sv = policy.score({1, 1}, Action::discrete_scalar(2));
  CHECK(sv.nonzeros() <= static_cast<std::size_t>(rank * (2 + 4)));
  CHECK(sv.densify().size() == (3 + 2 + 4) * rank);
}

TEST_CASE("softmax: temperature change never moves the argmax") {
  Rng rng = make_rng(49);
  const TensorShape shape({4, 5});
  const ParafacModel logits = random_model(shape, 2, rng);
  for (double beta : {0.2, 1.0, 3.7}) {
    const SoftmaxPolicy policy(logits, beta);
    for (int s = 0; s < 4; ++s) {
      const Vec fiber = logits.fiber_last_mode({s});
      int logit_argmax = 0;
      fiber.maxCoeff(&logit_argmax);
      const Vec p = policy.probs({s});
      int prob_argmax = 0;
      p.maxCoeff(&prob_argmax);
      CHECK(prob_argmax == logit_argmax);
    }
  }
}

// --- score vector layout ----------------------------------------------------

TEST_CASE("score vector: densify places entries at mode-major, rank-fastest slots") {
  const FactorLayout layout({3, 2}, 2);  // dense length (3 + 2) * 2 = 10
  ScoreVector sv(layout);
  sv.add(0, 1, 0, 5.0);   // slot 0*? -> offset 0 + 1*2 + 0 = 2
  sv.add(1, 0, 1, -2.0);  // offset 6 + 0*2 + 1 = 7
  sv.add(0, 2, 1, 1.5);   // offset 0 + 2*2 + 1 = 5
  const Vec dense = sv.densify();
  REQUIRE(dense.size() == 10);
  CHECK(dense[2] == 5.0);
  CHECK(dense[7] == -2.0);
  CHECK(dense[5] == 1.5);
  CHECK(dense.cwiseAbs().sum() == doctest::Approx(8.5));
}

TEST_CASE("score vector: duplicate (mode,row,col) entries accumulate") {
  const FactorLayout layout({2}, 1);
  ScoreVector sv(layout);
  sv.add(0, 0, 0, 1.0);
  sv.add(0, 0, 0, 2.5);
  CHECK(sv.densify()[0] == doctest::Approx(3.5));
}

TEST_CASE("factor layout: flatten/unflatten round-trips bit-exactly") {
  Rng rng = make_rng(50);
  const TensorShape shape({3, 2, 4});
  const ParafacModel model = random_model(shape, 2, rng);
  const FactorLayout layout(shape.dims(), 2);
  const Vec flat = layout.flatten(model);
  const std::vector<Mat> factors = layout.unflatten(flat);
  REQUIRE(factors.size() == 3);
  for (int d = 0; d < 3; ++d)
    CHECK((factors[d] - model.factor(d)).cwiseAbs().maxCoeff() == 0.0);
}

// --- KL divergence ----------------------------------------------------------

TEST_CASE("kl: identical policies give 0") {
  Rng rng = make_rng(51);
  const ParafacModel logits = random_model(TensorShape({2, 3}), 2, rng);
  const AnyPolicy policy = SoftmaxPolicy(logits, 1.0);
  CHECK(kl_divergence(policy, policy, {1}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("kl: gaussian closed form (mu_old - mu_new)^2 / (2 sigma^2)") {
  const AnyPolicy old_policy =
      GaussianPolicy(ParafacModel::constant(TensorShape({2}), 1, 0.0), 1.0);
  const AnyPolicy new_policy =
      GaussianPolicy(ParafacModel::constant(TensorShape({2}), 1, 1.0), 1.0);
  CHECK(kl_divergence(old_policy, new_policy, {0}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kl: softmax hand value for (.5,.5) vs (.25,.75)") {
  // logits chosen so beta=1 softmax gives exactly those probabilities
  Mat s(1, 1), a_old(2, 1), a_new(2, 1);
  s << 1.0;
  a_old << 0.0, 0.0;
  a_new << std::log(0.25), std::log(0.75);
  const AnyPolicy old_policy = SoftmaxPolicy(ParafacModel(TensorShape({1, 2}), 1, {s, a_old}), 1.0);
  const AnyPolicy new_policy = SoftmaxPolicy(ParafacModel(TensorShape({1, 2}), 1, {s, a_new}), 1.0);
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(kl_divergence(old_policy, new_policy, {0}) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("kl: family mismatch throws") {
  const AnyPolicy gaussian =
      GaussianPolicy(ParafacModel::constant(TensorShape({2}), 1, 0.0), 1.0);
  const AnyPolicy softmax =
      SoftmaxPolicy(ParafacModel::constant(TensorShape({2, 2}), 1, 0.0), 1.0);
  CHECK_THROWS_AS(kl_divergence(gaussian, softmax, {0}), std::invalid_argument);
}

// --- checkpoints -------------------------------------------------------------

TEST_CASE("checkpoints: gaussian policy round-trips bit-exactly") {
  Rng rng = make_rng(52);
  const TensorShape shape({3, 4, 2});
  const ParafacModel means = random_model(shape, 2, rng);
  const AnyPolicy policy = GaussianPolicy(means, 0.37, 2);

  const std::string path = (std::filesystem::temp_directory_path() / "gauss_ckpt_test.ckpt").string();
  save_policy_checkpoint(policy, path);
  const AnyPolicy loaded = load_policy_checkpoint(path);
  std::remove(path.c_str());

  const auto& g = std::get<GaussianPolicy>(loaded);
  CHECK(g.sigma() == 0.37);
  CHECK(g.action_dim() == 2);
  REQUIRE(g.means().shape() == shape);
  for (int d = 0; d < 3; ++d)
    CHECK((g.means().factor(d) - means.factor(d)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints: softmax policy round-trips bit-exactly") {
  Rng rng = make_rng(53);
  const TensorShape shape({3, 2, 4});
  const ParafacModel logits = random_model(shape, 3, rng);
  const AnyPolicy policy = SoftmaxPolicy(logits, 1.25);

  const std::string path = (std::filesystem::temp_directory_path() / "soft_ckpt_test.ckpt").string();
  save_policy_checkpoint(policy, path);
  const AnyPolicy loaded = load_policy_checkpoint(path);
  std::remove(path.c_str());

  const auto& s = std::get<SoftmaxPolicy>(loaded);
  CHECK(s.temperature() == 1.25);
  CHECK(s.num_actions() == 4);
  for (int d = 0; d < 3; ++d)
    CHECK((s.logits().factor(d) - logits.factor(d)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints: critic round-trips bit-exactly") {
  Rng rng = make_rng(54);
  const TensorShape shape({4, 4});
  const ParafacModel vf = random_model(shape, 2, rng);

  const std::string path = (std::filesystem::temp_directory_path() / "critic_ckpt_test.ckpt").string();
  save_critic_checkpoint(vf, path);
  const ParafacModel loaded = load_critic_checkpoint(path);
  std::remove(path.c_str());

  REQUIRE(loaded.shape() == shape);
  for (int d = 0; d < 2; ++d)
    CHECK((loaded.factor(d) - vf.factor(d)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints: loading a non-checkpoint file fails cleanly") {
  const std::string path = (std::filesystem::temp_directory_path() / "not_a_ckpt.ckpt").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("garbage", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_policy_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
}

// --- initial models -----------------------------------------------------------

TEST_CASE("random policy model: entries in [0.5, 1.5] * K^(-1/D), tensor entries O(1)") {
  Rng rng = make_rng(55);
  const TensorShape shape({4, 4, 4});
  const int rank = 3;
  const ParafacModel model = random_policy_model(shape, rank, rng);
  const double scale = std::pow(double(rank), -1.0 / 3.0);
  for (int d = 0; d < 3; ++d) {
    CHECK(model.factor(d).minCoeff() >= 0.5 * scale - 1e-12);
    CHECK(model.factor(d).maxCoeff() <= 1.5 * scale + 1e-12);
  }
  // entries are sums of K products of three factors in [0.5, 1.5]*K^(-1/3):
  // bounded by K * (1.5^3 / K) = 3.375
  for (int i = 0; i < 4; ++i) CHECK(std::abs(model.entry({i, i, i})) <= 3.375 + 1e-9);
}
