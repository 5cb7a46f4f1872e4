#include <benchmark/benchmark.h>

#include <limits>

#include "wmcm/baselines.hpp"
#include "wmcm/model_selection.hpp"
#include "wmcm/simulation.hpp"
#include "wmcm/solver.hpp"

namespace {

using namespace wmcm;

SimulatedTruth replication(int p, double tau) {
  ScenarioSpec spec;
  spec.p = p;
  spec.tau_pct = tau;
  spec.n_test = 10;
  return simulate(spec, 42);
}

void BM_FitWmcmr4(benchmark::State& state) {
  const SimulatedTruth t = replication(static_cast<int>(state.range(0)), 5.0);
  const WeightVector a = rct_weights(t.dataset.n());
  FitConfig cfg;
  cfg.rank = 1;
  cfg.lambda_w = 5.0;
  cfg.phi_c = 20.0;
  for (auto _ : state) benchmark::DoNotOptimize(fit(t.dataset, a, cfg));
}
BENCHMARK(BM_FitWmcmr4)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_FitMethod(benchmark::State& state) {
  const auto method = static_cast<Method>(state.range(0));
  const SimulatedTruth t = replication(10, 5.0);
  const WeightVector a = rct_weights(t.dataset.n());
  const MethodParams params{1, 5.0, 20.0};
  state.SetLabel(std::string(to_string(method)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_method(method, t.dataset, a, params, {}));
}
BENCHMARK(BM_FitMethod)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_CrossValidate(benchmark::State& state) {
  const SimulatedTruth t = replication(10, 5.0);
  const WeightVector a = rct_weights(t.dataset.n());
  const CvGrid grid = default_grid(t.dataset, a);
  for (auto _ : state)
    benchmark::DoNotOptimize(cross_validate(t.dataset, grid, Method::wmcmr4));
}
BENCHMARK(BM_CrossValidate)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace
