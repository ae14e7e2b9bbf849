// Serial reference against OpenMP variants of the dense kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "stgdl/kernels.hpp"
#include "stgdl/rng.hpp"

namespace {

using namespace stgdl;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <void (*Gemm)(const kernels::GemmArgs&)>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm({n, n, n, a, kernels::Trans::no, b, kernels::Trans::no, c, false});
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <void (*Dtw)(const kernels::PairwiseDtwArgs&)>
void bm_pairwise_dtw(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> series;
  for (std::size_t i = 0; i < nodes; ++i) series.push_back(random_values(96, 10 + i));
  std::vector<double> out(nodes * nodes);
  for (auto _ : state) {
    Dtw({series, out});
    benchmark::DoNotOptimize(out.data());
  }
}

template <void (*Permute)(std::span<const double>, std::span<const std::size_t>, std::span<const std::size_t>,
                          std::span<double>)>
void bm_permute(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const std::vector<std::size_t> shape{b, 12, 24, 8}, perm{0, 2, 1, 3};
  const auto in = random_values(b * 12 * 24 * 8, 3);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    Permute(in, shape, perm, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * in.size() * sizeof(double)));
}

}  // namespace

BENCHMARK(bm_gemm<kernels::serial::gemm>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<kernels::omp::gemm>)->Name("gemm/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_pairwise_dtw<kernels::serial::pairwise_dtw>)->Name("pairwise_dtw/serial")->Arg(24)->Arg(64);
BENCHMARK(bm_pairwise_dtw<kernels::omp::pairwise_dtw>)->Name("pairwise_dtw/omp")->Arg(24)->Arg(64);
BENCHMARK(bm_permute<kernels::serial::permute>)->Name("permute/serial")->Arg(32)->Arg(256);
BENCHMARK(bm_permute<kernels::omp::permute>)->Name("permute/omp")->Arg(32)->Arg(256);

BENCHMARK_MAIN();
