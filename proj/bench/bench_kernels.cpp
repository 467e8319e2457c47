// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "vcurl/kernels.hpp"
#include "vcurl/random.hpp"
#include "vcurl/visual.hpp"

using namespace vcurl;

namespace {

GrayFrame noise(int n, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 1);
  GrayFrame f(n, n);
  for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return f;
}

FloatImage smooth(int n, std::uint64_t seed) {
  const auto taps = kernels::gaussian_kernel(2.0);
  return kernels::separable_filter(kernels::to_float(noise(n, seed)), taps, ExecPolicy::serial);
}

template <ExecPolicy P>
void BM_AbsDiff(benchmark::State& st) {
  const auto a = noise(static_cast<int>(st.range(0)), 1), b = noise(static_cast<int>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::abs_diff(a, b, P));
}

template <ExecPolicy P>
void BM_Histogram(benchmark::State& st) {
  const auto a = noise(static_cast<int>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::histogram(a, P));
}

template <ExecPolicy P>
void BM_MeanMagnitude(benchmark::State& st) {
  const auto u = smooth(static_cast<int>(st.range(0)), 4), v = smooth(static_cast<int>(st.range(0)), 5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::mean_magnitude(u, v, P));
}

template <ExecPolicy P>
void BM_SeparableFilter(benchmark::State& st) {
  const auto img = smooth(static_cast<int>(st.range(0)), 6);
  const auto taps = kernels::gaussian_kernel(1.5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::separable_filter(img, taps, P));
}

template <ExecPolicy P>
void BM_Flow(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  GrayFrame a(n, n), b(n, n);
  const auto tex = smooth(n + 4, 7);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      a.at(r, c) = static_cast<std::uint8_t>(std::clamp(tex.at(r + 2, c + 2), 0.0f, 255.0f));
      b.at(r, c) = static_cast<std::uint8_t>(std::clamp(tex.at(r + 2, c), 0.0f, 255.0f));
    }
  }
  FlowConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(estimate_flow(a, b, cfg, P));
}

}  // namespace

BENCHMARK(BM_AbsDiff<ExecPolicy::serial>)->Arg(256)->Arg(1024);
BENCHMARK(BM_AbsDiff<ExecPolicy::parallel>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Histogram<ExecPolicy::serial>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Histogram<ExecPolicy::parallel>)->Arg(256)->Arg(1024);
BENCHMARK(BM_MeanMagnitude<ExecPolicy::serial>)->Arg(256)->Arg(1024);
BENCHMARK(BM_MeanMagnitude<ExecPolicy::parallel>)->Arg(256)->Arg(1024);
BENCHMARK(BM_SeparableFilter<ExecPolicy::serial>)->Arg(256)->Arg(512);
BENCHMARK(BM_SeparableFilter<ExecPolicy::parallel>)->Arg(256)->Arg(512);
BENCHMARK(BM_Flow<ExecPolicy::serial>)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Flow<ExecPolicy::parallel>)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
