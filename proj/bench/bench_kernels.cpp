#include <vector>

#include <benchmark/benchmark.h>

#include "dcan/kernels.hpp"
#include "dcan/rng.hpp"

namespace k = dcan::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    dcan::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

template <auto Gemm>
void bm_gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::vector<double> a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        Gemm(k::Trans::no, k::Trans::no, {n, n, n}, a, b, c, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * n * n));
}

template <auto Assign>
void bm_assign(benchmark::State& state) {
    const auto points = static_cast<std::size_t>(state.range(0));
    const std::size_t dim = 32, centroids = 128;
    const std::vector<double> p = random_values(points * dim, 3), c = random_values(centroids * dim, 4);
    std::vector<std::size_t> assignment(points);
    std::vector<double> dist(points);
    for (auto _ : state) {
        Assign(p, c, dim, assignment, dist);
        benchmark::DoNotOptimize(dist.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * points * centroids));
}

}  // namespace

BENCHMARK(bm_gemm<k::serial::gemm>)->Name("gemm/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_gemm<k::omp::gemm>)->Name("gemm/omp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_assign<k::serial::assign_nearest>)->Name("assign_nearest/serial")->Range(256, 8192);
BENCHMARK(bm_assign<k::omp::assign_nearest>)->Name("assign_nearest/omp")->Range(256, 8192);

BENCHMARK_MAIN();
