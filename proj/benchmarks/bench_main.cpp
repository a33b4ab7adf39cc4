#include <benchmark/benchmark.h>

#include "thermo/inference.hpp"
#include "thermo/metrics.hpp"
#include "thermo/net.hpp"
#include "thermo/scaling.hpp"
#include "thermo/synth.hpp"

using namespace thermo;

namespace {

TaskDataset bench_task(std::uint32_t records) {
  SynthConfig cfg;
  cfg.num_tasks = 1;
  cfg.records_per_task = records;
  cfg.seed = 99;
  return generate_suite(cfg)[0];
}

void BM_Ece(benchmark::State& state) {
  TaskDataset ds = bench_task(static_cast<std::uint32_t>(state.range(0)));
  ProbMatrix probs = apply_temperature_all(ds, 1.5);
  LabelVector labels;
  for (const auto& r : ds.records) labels.push_back(r.label);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ece(probs, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Arg(1000)->Arg(10000);

void BM_Forward(benchmark::State& state) {
  TaskDataset ds = bench_task(256);
  ThermometerParams p = init_params(ds.feature_dim,
                                    static_cast<std::uint32_t>(state.range(0)), 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(p, ds.records[i % ds.records.size()].features));
    ++i;
  }
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(64)->Arg(256);

void BM_LossAndGrad(benchmark::State& state) {
  TaskDataset ds = bench_task(static_cast<std::uint32_t>(state.range(0)));
  ThermometerParams p = init_params(ds.feature_dim, 8, 1);
  std::vector<const CalibrationRecord*> batch;
  for (const auto& r : ds.records) batch.push_back(&r);
  GammaPrior prior;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grad(p, batch, 0.01, 16.0, prior));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrad)->Arg(16)->Arg(128);

void BM_FitTemperatureScaling(benchmark::State& state) {
  TaskDataset ds = bench_task(static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_temperature_scaling(ds));
  }
}
BENCHMARK(BM_FitTemperatureScaling)->Arg(1000)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
