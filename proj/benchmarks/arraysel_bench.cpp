#include <random>

#include <benchmark/benchmark.h>

#include "arraysel/dataset.hpp"
#include "arraysel/doa.hpp"
#include "arraysel/nn.hpp"

using namespace arraysel;

namespace {

void BM_BestSubarray(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const auto uca = build_uca(m, 0.5);
  const SourceDirection dir(90.0, 37.0);
  const auto r = asymptotic_covariance(steering_vector(uca, dir), 1.0, 0.01);
  CrbOptions o;
  o.known_elevation = true;
  for (auto _ : state) benchmark::DoNotOptimize(best_subarray(uca, dir, r, k, 0.01, 100, o));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(binomial(m, k)));
}
BENCHMARK(BM_BestSubarray)->Args({8, 3})->Args({16, 3})->Args({16, 6})->Unit(benchmark::kMillisecond);

void BM_CnnForward(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto model = build_paper_cnn(m, 11, static_cast<int>(state.range(1)), 128);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> x(3u * m * m);
  for (auto& v : x) v = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x));
}
BENCHMARK(BM_CnnForward)->Args({8, 32})->Args({16, 32})->Args({16, 64})->Unit(benchmark::kMicrosecond);

void BM_MusicAzimuthScan(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto uca = build_uca(m, 0.5);
  SimulationParams p;
  p.seed = 3;
  const auto r = sample_covariance(simulate_snapshots(uca, SourceDirection(90.0, 200.0), p));
  const auto grid = AngularGrid::azimuth_scan(90.0, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(music_estimate(uca, r, grid));
}
BENCHMARK(BM_MusicAzimuthScan)->Arg(3)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
