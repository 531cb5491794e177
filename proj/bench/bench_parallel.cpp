#include <benchmark/benchmark.h>

#include "lobexec/market/shape.hpp"
#include "lobexec/policy/policy.hpp"
#include "lobexec/train/evaluate.hpp"
#include "lobexec/train/trainer.hpp"

using namespace lobexec;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

const StationaryShape& shape() {
  static const StationaryShape s = [] {
    ShapeEstimationOptions o;
    o.samples = 4;
    o.horizon = 1000.0;
    return estimate_stationary_shape(market_preset(MarketKind::Noise), o);
  }();
  return s;
}

EnvConfig env() {
  EnvConfig e;
  e.market = market_preset(MarketKind::Noise);
  e.shape = shape();
  return e;
}

void BM_Evaluate(benchmark::State& state) {
  const EnvConfig cfg = env();
  const Controller twap = heuristic_controller(HeuristicKind::Twap);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(twap, cfg, 256, 7, mode(state)).mean);
  }
  state.SetItemsProcessed(state.iterations() * 256);
}

void BM_Collect(benchmark::State& state) {
  const EnvConfig cfg = env();
  TrainConfig tc;
  tc.parallel_envs = 16;
  tc.execution = mode(state);
  Rng init(3);
  const LogisticNormalPolicy policy(ObservationLayout::make(cfg.lots, cfg.simplex_dim).size, cfg.simplex_dim, init);
  for (auto _ : state) {
    benchmark::DoNotOptimize(collect(policy, cfg, tc, 1).rewards.sum());
  }
  state.SetItemsProcessed(state.iterations() * tc.parallel_envs * tc.steps_per_env);
}

void BM_ShapeEstimation(benchmark::State& state) {
  ShapeEstimationOptions o;
  o.samples = 8;
  o.burn_in = 100.0;
  o.horizon = 500.0;
  o.execution = mode(state);
  const MarketConfig cfg = market_preset(MarketKind::Noise);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_stationary_shape(cfg, o).spread);
  }
}

} // namespace

BENCHMARK(BM_Evaluate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Collect)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ShapeEstimation)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
