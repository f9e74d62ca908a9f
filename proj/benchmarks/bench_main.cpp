// Microbenchmarks for the hot paths: tensor entry/fiber evaluation, score
// computation, ALS sweeps, FIM-vector products, and batch rollouts.

#include <benchmark/benchmark.h>

#include "tlr/als.hpp"
#include "tlr/environments.hpp"
#include "tlr/policies.hpp"
#include "tlr/rng.hpp"
#include "tlr/tensor.hpp"
#include "tlr/trainers.hpp"
#include "tlr/trajectory.hpp"

using namespace tlr;

namespace {

ParafacModel random_model(const TensorShape& shape, int rank, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<Mat> factors;
  for (int d = 0; d < shape.num_modes(); ++d) {
    Mat f(shape.dim(d), rank);
    for (int i = 0; i < f.rows(); ++i)
      for (int k = 0; k < f.cols(); ++k) f(i, k) = uniform_double(rng, -1, 1);
    factors.push_back(std::move(f));
  }
  return ParafacModel(shape, rank, std::move(factors));
}

void bm_parafac_entry(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int rank = static_cast<int>(state.range(1));
  const ParafacModel model = random_model(TensorShape({n, n, n}), rank, 1);
  const MultiIndex idx{n / 2, n / 3, n / 4};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.entry(idx));
  }
}
BENCHMARK(bm_parafac_entry)->Args({20, 2})->Args({20, 8})->Args({100, 4});

void bm_parafac_fiber(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int rank = static_cast<int>(state.range(1));
  const ParafacModel model = random_model(TensorShape({n, n, n}), rank, 2);
  const MultiIndex prefix{n / 2, n / 3};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.fiber_last_mode(prefix));
  }
}
BENCHMARK(bm_parafac_fiber)->Args({20, 2})->Args({100, 4});

void bm_score_gaussian(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  const GaussianPolicy policy(random_model(TensorShape({10, 10, 10}), rank, 3), 0.5);
  const AnyPolicy any = policy;
  const MultiIndex idx{4, 5, 6};
  const Action action = Action::continuous_scalar(0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy_score(any, idx, action));
  }
}
BENCHMARK(bm_score_gaussian)->Arg(2)->Arg(8);

void bm_score_softmax(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  const SoftmaxPolicy policy(random_model(TensorShape({10, 10, 4}), rank, 4), 1.0);
  const AnyPolicy any = policy;
  const MultiIndex idx{4, 5};
  const Action action = Action::discrete_scalar(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy_score(any, idx, action));
  }
}
BENCHMARK(bm_score_softmax)->Arg(2)->Arg(8);

void bm_als_sweep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int rank = static_cast<int>(state.range(1));
  const DenseTensor target = reconstruct(random_model(TensorShape({n, n, n}), rank, 5));
  for (auto _ : state) {
    AlsOptions options;
    options.max_iters = 1;  // time a single sweep, not convergence
    options.tol = 0.0;
    benchmark::DoNotOptimize(als_fit(target, rank, options));
  }
}
BENCHMARK(bm_als_sweep)->Args({20, 4})->Args({40, 8})->Unit(benchmark::kMillisecond);

void bm_fim_vector_product(benchmark::State& state) {
  const Gridworld env(5, 5, 4, 4);
  const AnyPolicy policy = SoftmaxPolicy(
      random_model(TensorShape({5, 5, 4}), static_cast<int>(state.range(0)), 6), 1.0);
  TrajectoryBatch batch = sample_batch(env, policy, 8, 50, 7);
  Rng rng = make_rng(8);
  Vec v(policy_layout(policy).size());
  for (int i = 0; i < v.size(); ++i) v[i] = uniform_double(rng, -1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fim_vector_product(policy, batch, v, 0.1, 50));
  }
}
BENCHMARK(bm_fim_vector_product)->Arg(2)->Arg(8);

void bm_rollout_batch(benchmark::State& state) {
  const Gridworld env(5, 5, 4, 4);
  const AnyPolicy policy = SoftmaxPolicy(
      random_model(TensorShape({5, 5, 4}), 2, 9), 1.0);
  std::uint64_t iteration = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_batch(env, policy, 8, 50, 10, iteration++));
  }
}
BENCHMARK(bm_rollout_batch)->Unit(benchmark::kMicrosecond);

void bm_rollout_wireless(benchmark::State& state) {
  const Wireless env{WirelessConfig{}};
  TrainerConfig config;
  config.rank = 2;
  const AnyPolicy policy = make_initial_policy(env, config);
  std::uint64_t iteration = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_batch(env, policy, 8, 50, 11, iteration++));
  }
}
BENCHMARK(bm_rollout_wireless)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
