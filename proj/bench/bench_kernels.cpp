#include <benchmark/benchmark.h>

#include <vector>

#include "distillab/kernels.hpp"
#include "distillab/rng.hpp"

namespace k = distillab::kernels;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  distillab::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

// Square gemm, n = state.range(0).
template <bool Parallel>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n, 1), b = noise(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::gemm_nn<float>(n, n, n, a, b, c);
    } else {
      k::reference::gemm_nn<float>(n, n, n, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_gemm_nt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n, 3), b = noise(n * n, 4);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::gemm_nt<float>(n, n, n, a, b, c);
    } else {
      k::reference::gemm_nt<float>(n, n, n, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

// First conv layer of the desk preset over one second of audio, then a
// wide inner layer.
template <bool Parallel>
void BM_conv1d(benchmark::State& state) {
  const std::size_t t_in = static_cast<std::size_t>(state.range(0)), c_in = static_cast<std::size_t>(state.range(1));
  const std::size_t c_out = 64, kw = static_cast<std::size_t>(state.range(2)), stride = 2;
  const std::size_t t_out = (t_in - kw) / stride + 1;
  const auto x = noise(t_in * c_in, 5), w = noise(c_out * c_in * kw, 6), bias = noise(c_out, 7);
  std::vector<float> y(t_out * c_out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv1d<float>(t_in, c_in, c_out, kw, stride, x, w, bias, y);
    } else {
      k::reference::conv1d<float>(t_in, c_in, c_out, kw, stride, x, w, bias, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_gemm_nn<false>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nn<true>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nt<false>)->Name("gemm_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nt<true>)->Name("gemm_nt/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_conv1d<false>)->Name("conv1d/serial")->Args({16000, 1, 10})->Args({1600, 64, 3});
BENCHMARK(BM_conv1d<true>)->Name("conv1d/omp")->Args({16000, 1, 10})->Args({1600, 64, 3});

BENCHMARK_MAIN();
