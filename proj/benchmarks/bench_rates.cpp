#include <benchmark/benchmark.h>

#include <cmath>

#include "cdl/rates.hpp"

namespace {

const double kSqrt2 = std::sqrt(2.0);

void BM_RateBundleConstant(benchmark::State& state) {
  const cdl::KappaProfile kappa = cdl::KappaProfile::constant(1.0);
  cdl::RateBundleOptions opts;
  opts.r_max = 12.0;
  opts.n_nodes = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdl::compute_rate_bundle(kappa, kSqrt2, opts));
  }
}
BENCHMARK(BM_RateBundleConstant)->Arg(2001)->Arg(8001)->Arg(32001);

void BM_RateBundlePerturbed(benchmark::State& state) {
  const cdl::KappaProfile kappa =
      cdl::KappaProfile::constant(1.0).perturbed_by_inverse_r(
          static_cast<double>(state.range(0)));
  cdl::RateBundleOptions opts;
  opts.r_max = cdl::suggest_r_max(kappa);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdl::compute_rate_bundle(kappa, kSqrt2, opts));
  }
}
BENCHMARK(BM_RateBundlePerturbed)->Arg(4)->Arg(16);

void BM_HessianBound(benchmark::State& state) {
  const cdl::KappaProfile kappa =
      cdl::KappaProfile::constant(1.0).perturbed_by_inverse_r(4.0);
  cdl::RateBundleOptions opts;
  opts.r_max = cdl::suggest_r_max(kappa);
  const cdl::RateBundle bundle = cdl::compute_rate_bundle(kappa, kSqrt2, opts);
  cdl::ModelConstants mc;
  mc.M_u = 1.0;
  mc.MF_x = 1.0;
  mc.M_x = 1.0;
  mc.M_xx = 0.5;
  const cdl::CoefficientBounds cb =
      cdl::coefficient_bounds(mc, 2.0, [](double) { return 1.0; });
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdl::hessian_bound(1.0, cb, bundle, 3.0));
  }
}
BENCHMARK(BM_HessianBound);

}  // namespace
