#include <benchmark/benchmark.h>

#include "ssg/algebra.hpp"
#include "ssg/kernels.hpp"
#include "ssg/series.hpp"
#include "ssg/spde_mc.hpp"

using namespace ssg;

namespace {

ModelParams params() {
  ModelParams p;
  p.a = 1.5;
  p.T = -1.0;
  p.signConvention = SignConvention::paper;
  return p;
}

void BM_RetardedMassive(benchmark::State& state) {
  double x = 0.0;
  for (auto _ : state) {
    x += 1e-7;
    benchmark::DoNotOptimize(retarded_massive({1.0, x}, 1.0, SignConvention::green));
  }
}
BENCHMARK(BM_RetardedMassive);

void BM_CovarianceQ(benchmark::State& state) {
  const ModelParams p = params();
  for (auto _ : state)
    benchmark::DoNotOptimize(covariance_q({0.3, 0.1}, {0.2, -0.4}, p, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CovarianceQ)->Arg(8)->Arg(32);

void BM_WickExpand(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(wick_expand(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_WickExpand)->Arg(4)->Arg(8);

void BM_CorrelationCoefficient(benchmark::State& state) {
  SeriesContext ctx;
  ctx.params = params();
  ctx.g = single_bump(0.0, 0.0, 0.4, 3.0);
  ctx.budget = state.range(0);
  const SmearingFunction f1 = single_bump(0.5, 0.1, 0.2), f2 = single_bump(0.4, -0.15, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(correlation_coefficient(1, f1, f2, ctx));
}
BENCHMARK(BM_CorrelationCoefficient)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_LatticeRealization(benchmark::State& state) {
  const ModelParams p = params();
  const SmearingFunction g = single_bump(0.0, 0.0, 0.4, 3.0);
  const SmearingFunction f = single_bump(0.5, 0.1, 0.2);
  const LatticeGrid grid = LatticeGrid::covering({f, g}, p.T, 1.0 / static_cast<double>(state.range(0)));
  const std::vector<McObservable> obs = {{"phi(f)phi(f)", 2, {f, f}}};
  std::uint64_t r = 0;
  for (auto _ : state) benchmark::DoNotOptimize(realization_values(obs, grid, p, g, 7, r++));
  state.SetLabel(std::to_string(grid.nT) + "x" + std::to_string(grid.nX));
}
BENCHMARK(BM_LatticeRealization)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
