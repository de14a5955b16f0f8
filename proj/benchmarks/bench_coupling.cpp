#include <benchmark/benchmark.h>

#include <cmath>

#include "cdl/coupling.hpp"

namespace {

const double kSqrt2 = std::sqrt(2.0);

void BM_ReflectionCoupling(benchmark::State& state) {
  cdl::DriftField drift = [](double, std::span<const double> x,
                             std::span<double> out) { out[0] = -x[0]; };
  cdl::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.n_paths = static_cast<int>(state.range(0));
  cfg.horizon = 1.0;
  cfg.seed = 1;
  cfg.output_stride = 100;
  cfg.n_workers = static_cast<int>(state.range(1));
  const double a = 0.5, b = -0.5;
  std::size_t steps = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cdl::reflection_coupling(drift, kSqrt2, {&a, 1}, {&b, 1}, cfg, nullptr));
    steps += static_cast<std::size_t>(cfg.n_paths) * 1000;
  }
  state.SetItemsProcessed(static_cast<int64_t>(steps));
}
BENCHMARK(BM_ReflectionCoupling)
    ->Args({2048, 1})
    ->Args({2048, 4})
    ->Args({16384, 1})
    ->Args({16384, 4});

void BM_StickyDominating(benchmark::State& state) {
  const cdl::KappaProfile kappa = cdl::KappaProfile::constant(1.0);
  cdl::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.n_paths = 4096;
  cfg.horizon = 1.0;
  cfg.seed = 2;
  cfg.output_stride = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdl::sticky_dominating(
        kappa, [](double) { return 1.0; }, kSqrt2, 0.0, cfg));
  }
  state.SetItemsProcessed(static_cast<int64_t>(cfg.n_paths) * 1000);
}
BENCHMARK(BM_StickyDominating);

}  // namespace
