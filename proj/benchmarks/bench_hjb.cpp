#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "cdl/hjb.hpp"

namespace {

const double kSqrt2 = std::sqrt(2.0);

cdl::ControlModel lq_model() {
  cdl::FkExampleParams p;
  p.alpha = 1.0;
  p.sigma = kSqrt2;
  p.g_terminal = [](double x) { return x; };
  p.g_lip = 1.0;
  return cdl::make_example_fk(p);
}

// full backward solve over a short horizon; throughput is node-steps/s
void BM_BackwardSolve(benchmark::State& state) {
  const cdl::ControlModel model = lq_model();
  const cdl::Grid1D grid{-6.0, 6.0, static_cast<int>(state.range(0))};
  std::vector<double> terminal(grid.n_x);
  for (int i = 0; i < grid.n_x; ++i) terminal[i] = grid.x(i);
  cdl::SolveOptions opts;
  opts.grad_clamp = 4.0 * kSqrt2;
  opts.n_snapshots = 2;
  std::size_t node_steps = 0;
  for (auto _ : state) {
    const cdl::ValueFunction vf =
        cdl::solve_backward(model, terminal, 0.05, grid, opts, "bench");
    node_steps += vf.trace.t.size() * static_cast<std::size_t>(grid.n_x);
    benchmark::DoNotOptimize(vf.values.back()[0]);
  }
  state.SetItemsProcessed(static_cast<int64_t>(node_steps));
}
BENCHMARK(BM_BackwardSolve)->Arg(301)->Arg(601)->Arg(1201);

void BM_ErgodicSweep(benchmark::State& state) {
  const cdl::ControlModel model = lq_model();
  const cdl::Grid1D grid{-6.0, 6.0, 301};
  cdl::ErgodicOptions opts;
  opts.max_iter = 60;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdl::ergodic_solve(model, grid, opts).alpha_inf);
  }
}
BENCHMARK(BM_ErgodicSweep);

}  // namespace
