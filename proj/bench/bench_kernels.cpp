#include "kdisc/kernels.hpp"
#include "kdisc/mmd.hpp"
#include "kdisc/rng.hpp"

#include <benchmark/benchmark.h>

using namespace kdisc;

namespace {

PointSet normal_points(Index n, Index d, std::uint64_t seed) {
  RngStream rng(seed, "bench");
  PointSet out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) out(i, j) = rng.normal();
  return out;
}

const KernelSpec kSpec = KernelSpec::matern(MaternOrder::FiveHalves, 1.0, 1.0);

void BM_Gram(benchmark::State& state) {
  const PointSet x = normal_points(state.range(0), 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gram(kSpec, x));
  state.SetComplexityN(state.range(0));
}

void BM_GramReference(benchmark::State& state) {
  const PointSet x = normal_points(state.range(0), 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::gram(kSpec, x));
  state.SetComplexityN(state.range(0));
}

void BM_KernelSum(benchmark::State& state) {
  const PointSet x = normal_points(state.range(0), 3, 2), y = normal_points(state.range(0), 3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernel_sum(kSpec, x, y));
  state.SetComplexityN(state.range(0));
}

void BM_KernelSumReference(benchmark::State& state) {
  const PointSet x = normal_points(state.range(0), 3, 2), y = normal_points(state.range(0), 3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::kernel_sum(kSpec, x, y));
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_Gram)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);
BENCHMARK(BM_GramReference)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);
BENCHMARK(BM_KernelSum)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);
BENCHMARK(BM_KernelSumReference)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);

BENCHMARK_MAIN();
