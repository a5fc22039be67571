#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "sslab/kernels.hpp"
#include "sslab/metrics.hpp"
#include "sslab/rng.hpp"
#include "sslab/stats.hpp"

using namespace sslab;
using namespace sslab::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

ConvGeometry conv_geometry(const benchmark::State& state) {
  ConvGeometry g;
  g.batch = 16;
  g.in_channels = g.out_channels = static_cast<std::size_t>(state.range(0));
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(1));
  g.kernel_h = g.kernel_w = 3;
  g.pad = 1;
  return g;
}

template <auto Kernel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.input_size(), 1), w = random_vec(g.weight_size(), 2), b = random_vec(g.out_channels, 3);
  std::vector<double> y(g.output_size());
  for (auto _ : state) {
    Kernel(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.output_size() * g.in_channels * 9));
}

template <auto Kernel>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.input_size(), 1), w = random_vec(g.weight_size(), 2);
  const auto gy = random_vec(g.output_size(), 3);
  std::vector<double> gx(g.input_size()), gw(g.weight_size()), gb(g.out_channels);
  for (auto _ : state) {
    Kernel(g, x, w, gy, gx, gw, gb);
    benchmark::DoNotOptimize(gx.data());
  }
}

template <auto Kernel>
void BM_LinearForward(benchmark::State& state) {
  LinearGeometry g{16, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
  const auto x = random_vec(g.batch * g.in_features, 1), w = random_vec(g.in_features * g.out_features, 2);
  const auto b = random_vec(g.out_features, 3);
  std::vector<double> y(g.batch * g.out_features);
  for (auto _ : state) {
    Kernel(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <BootstrapReport (*Fn)(std::span<const ScoreEntry>, const BootstrapConfig&)>
void BM_Bootstrap(benchmark::State& state) {
  Rng rng(4);
  ScoreSet s;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    const int y = static_cast<int>(i % 2);
    s.push_back({"s" + std::to_string(i), y, 1.0 / (1.0 + std::exp(-rng.normal() - 0.8 * y))});
  }
  BootstrapConfig cfg;
  cfg.B = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(s, cfg).ci_lo);
}

}  // namespace

BENCHMARK(BM_ConvForward<conv2d_forward>)->Args({8, 32})->Args({16, 56})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<conv2d_forward_reference>)->Args({8, 32})->Args({16, 56})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<conv2d_backward>)->Args({8, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<conv2d_backward_reference>)->Args({8, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LinearForward<linear_forward>)->Arg(512)->Arg(2048)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LinearForward<linear_forward_reference>)->Arg(512)->Arg(2048)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Bootstrap<bootstrap_auc>)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap<bootstrap_auc_reference>)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
