#include <random>

#include <benchmark/benchmark.h>

#include "fmc/cluster.hpp"
#include "fmc/grid.hpp"
#include "fmc/reference.hpp"
#include "fmc/trajectory.hpp"

namespace {

fmc::Grid random_grid(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  fmc::Grid g(h, w, c);
  for (double& v : g.values()) v = n(rng);
  return g;
}

fmc::ConvWeights random_conv(int cin, int cout) {
  fmc::ConvWeights w(3, cin, cout);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : w.kernel) v = n(rng);
  return w;
}

fmc::FlowPair shifted_pair(int h, int w) {
  fmc::FlowPair p{fmc::Grid(h, w, 2), fmc::Grid(h, w, 2)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      p.forward(r, c, 0) = 1.5;
      p.backward(r, c, 0) = -1.5;
    }
  }
  return p;
}

void BM_conv2d(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto in = random_grid(size, size, 32, 1);
  const auto w = random_conv(32, 32);
  for (auto _ : state) benchmark::DoNotOptimize(fmc::conv2d(in, w));
}

void BM_conv2d_reference(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto in = random_grid(size, size, 32, 1);
  const auto w = random_conv(32, 32);
  for (auto _ : state) benchmark::DoNotOptimize(fmc::reference::conv2d(in, w));
}

void BM_group_norm(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto in = random_grid(size, size, 64, 2);
  const std::vector<double> gamma(64, 1.0), beta(64, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(fmc::group_norm(in, 8, gamma, beta));
}

void BM_group_norm_reference(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto in = random_grid(size, size, 64, 2);
  const std::vector<double> gamma(64, 1.0), beta(64, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(fmc::reference::group_norm(in, 8, gamma, beta));
}

void BM_warp(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto pair = shifted_pair(size, size);
  const fmc::Grid fg(size, size, 1, 1.0);
  const auto values = random_grid(size, size, 32, 3);
  const auto link = fmc::link_mask(pair, fg, fg);
  for (auto _ : state) benchmark::DoNotOptimize(fmc::warp_g(values, pair, link));
}

void BM_warp_reference(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto pair = shifted_pair(size, size);
  const fmc::Grid fg(size, size, 1, 1.0);
  const auto values = random_grid(size, size, 32, 3);
  const auto link = fmc::reference::link_mask(pair, fg, fg);
  for (auto _ : state) benchmark::DoNotOptimize(fmc::reference::warp_g(values, pair, link));
}

std::vector<fmc::Vector> sphere_points(int n) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<fmc::Vector> pts;
  for (int i = 0; i < n; ++i) {
    fmc::Vector v(16);
    for (int d = 0; d < 16; ++d) v[d] = g(rng) + (i % 4 == d ? 4.0 : 0.0);
    pts.push_back(v.normalized());
  }
  return pts;
}

void BM_mean_shift(benchmark::State& state) {
  const auto pts = sphere_points(static_cast<int>(state.range(0)));
  fmc::VMFConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(fmc::cluster_embeddings(pts, cfg));
}

void BM_mean_shift_reference(benchmark::State& state) {
  const auto pts = sphere_points(static_cast<int>(state.range(0)));
  fmc::VMFConfig cfg;
  std::vector<fmc::Vector> seeds;
  for (int i : fmc::select_seeds(pts, cfg)) seeds.push_back(pts[i]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fmc::reference::mean_shift_modes(pts, seeds, cfg.kappa, cfg.tol, cfg.max_iter));
  }
}

}  // namespace

BENCHMARK(BM_conv2d)->Arg(32)->Arg(64);
BENCHMARK(BM_conv2d_reference)->Arg(32)->Arg(64);
BENCHMARK(BM_group_norm)->Arg(64)->Arg(128);
BENCHMARK(BM_group_norm_reference)->Arg(64)->Arg(128);
BENCHMARK(BM_warp)->Arg(64)->Arg(128);
BENCHMARK(BM_warp_reference)->Arg(64)->Arg(128);
BENCHMARK(BM_mean_shift)->Arg(1000)->Arg(4000);
BENCHMARK(BM_mean_shift_reference)->Arg(1000)->Arg(4000);

BENCHMARK_MAIN();
