// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "flowvgae/numerics/kernels.hpp"

namespace k = flowvgae::numerics::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// A window-sized graph: n connection rows, each tied to 2 of n/8 IP rows.
k::Adjacency window_adjacency(std::size_t n) {
  const std::size_t ips = n / 8 + 1;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(ips - 1));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t c = 0; c < n; ++c) {
    edges.emplace_back(pick(rng), c);
    edges.emplace_back(pick(rng), c);
  }
  return k::Adjacency::build(ips, n, std::move(edges));
}

template <bool Parallel>
void matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t kk = 32, n = 32;
  const auto a = random_values(m * kk, 1);
  const auto b = random_values(kk * n, 2);
  std::vector<double> out(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::matmul(a, b, out, m, kk, n);
    } else {
      k::serial::matmul(a, b, out, m, kk, n);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * kk * n));
}

template <bool Parallel>
void mean_aggregate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  const auto adj = window_adjacency(n);
  const auto x = random_values(adj.n_src * d, 3);
  std::vector<double> out(n * d);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::mean_aggregate(x, adj, out, d);
    } else {
      k::serial::mean_aggregate(x, adj, out, d);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * adj.edges.size() * d));
}

}  // namespace

BENCHMARK(matmul<false>)->Name("matmul/serial")->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(matmul<true>)->Name("matmul/parallel")->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(mean_aggregate<false>)->Name("mean_aggregate/serial")->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(mean_aggregate<true>)->Name("mean_aggregate/parallel")->RangeMultiplier(4)->Range(256, 16384);

BENCHMARK_MAIN();
