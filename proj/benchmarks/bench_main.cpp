#include <benchmark/benchmark.h>

#include "gmlab/align.hpp"
#include "gmlab/gmm.hpp"
#include "gmlab/tensor.hpp"

using namespace gmlab;

static void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    Tensor a = sample_standard_normal(rng, {n, n});
    a = Tensor::param(a.shape(), a.values());
    Tensor b = detach(sample_standard_normal(rng, {n, n}));
    Tensor loss = sum(matmul(a, b));
    backward(loss);
    benchmark::DoNotOptimize(a.grad());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64);

static void BM_SoftAlignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor p = sample_uniform01(rng, {n, n});
  for (auto _ : state) {
    benchmark::DoNotOptimize(soft_expected_alignment(p).values());
  }
}
BENCHMARK(BM_SoftAlignment)->Arg(8)->Arg(32);

static void BM_GmmLogDensity(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  GmmParams params;
  params.weights = Tensor::constant({4}, {0.25, 0.25, 0.25, 0.25});
  params.means = detach(sample_standard_normal(rng, {4, 8}));
  params.scales = detach(add_scalar(sample_uniform01(rng, {4, 8}), 0.5));
  Tensor x = detach(sample_standard_normal(rng, {rows, 8}));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmm_log_density_rows(x, params).values());
  }
}
BENCHMARK(BM_GmmLogDensity)->Arg(16)->Arg(128);

BENCHMARK_MAIN();
