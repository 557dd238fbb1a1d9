#include <benchmark/benchmark.h>

#include "cmil/copula.hpp"
#include "cmil/marginal.hpp"
#include "cmil/policy.hpp"
#include "cmil/random.hpp"

using namespace cmil;

namespace {

SampleSet random_samples(int state_dim, int coords, int n, Rng& rng) {
  SampleSet s{Eigen::MatrixXd(state_dim, n), Eigen::MatrixXd(coords, n)};
  for (Eigen::Index i = 0; i < s.states.size(); ++i) s.states.data()[i] = 2.0 * uniform01(rng) - 1.0;
  for (Eigen::Index i = 0; i < s.actions.size(); ++i) s.actions.data()[i] = 0.3 * standard_normal(rng);
  return s;
}

// Args: samples per epoch (M * T), action coordinates D.
void BM_MarginalEpoch(benchmark::State& state) {
  Rng rng(1);
  const int n = static_cast<int>(state.range(0));
  const int D = static_cast<int>(state.range(1));
  const SampleSet data = random_samples(10, D, n, rng);
  const MarginalModel init = marginal_init(10, D, {}, 2, 64, 2);
  MarginalTrainConfig cfg;
  cfg.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(marginal_train(init, data, cfg));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MarginalEpoch)->Args({5000, 10})->Args({10000, 10})->Args({5000, 20})->Unit(benchmark::kMillisecond);

void BM_MixtureCopulaEpoch(benchmark::State& state) {
  Rng rng(3);
  const int n = static_cast<int>(state.range(0));
  const int D = static_cast<int>(state.range(1));
  Eigen::MatrixXd states(10, n);
  Eigen::MatrixXd u(D, n);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = 2.0 * uniform01(rng) - 1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = 0.001 + 0.998 * uniform01(rng);
  const GaussianMixtureCopula init = gmc_init(10, D, 4, 64, 4);
  CopulaTrainConfig cfg;
  cfg.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(gmc_train(init, states, u, cfg));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MixtureCopulaEpoch)->Args({5000, 10})->Args({10000, 10})->Args({5000, 20})->Unit(benchmark::kMillisecond);

void BM_Quantile(benchmark::State& state) {
  const GaussianMixture1D gm({0.5, 0.5}, {-0.4, 0.3}, {0.05, 0.2});
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(gm_quantile(gm, uniform01(rng)));
}
BENCHMARK(BM_Quantile);

// Arg: KDE support size, 10 coordinates.
void BM_KdeLogDensity(benchmark::State& state) {
  Rng rng(6);
  Eigen::MatrixXd pts(10, state.range(0));
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = uniform01(rng);
  const Copula c = kde_fit(pts);
  for (auto _ : state) {
    Eigen::VectorXd u(10);
    for (Eigen::Index d = 0; d < 10; ++d) u[d] = uniform01(rng);
    benchmark::DoNotOptimize(copula_logdensity(c, CopulaPoint::clamped(u)));
  }
}
BENCHMARK(BM_KdeLogDensity)->Arg(2000)->Arg(20000);

// Arg: n_samples averaged per prediction.
void BM_PredictAction(benchmark::State& state) {
  Rng rng(7);
  Eigen::MatrixXd pts(10, 5000);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = uniform01(rng);
  const CopulaPolicy p{marginal_init(10, 10, {}, 2, 64, 8), kde_fit(pts)};
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(10, 0.1);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(predict_action(p, s, n, rng));
}
BENCHMARK(BM_PredictAction)->Arg(1)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
