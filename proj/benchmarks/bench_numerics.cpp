// Microbenchmarks for the numeric kernels on training-shaped inputs.
#include <benchmark/benchmark.h>

#include "sll/losses.hpp"
#include "sll/matrix.hpp"
#include "sll/numerics.hpp"
#include "sll/projection.hpp"
#include "sll/rng.hpp"

namespace {

void bm_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    sll::SeededRng rng(1);
    const sll::Matrix a = sll::gaussian_matrix(128, n, rng);
    const sll::Matrix b = sll::gaussian_matrix(n, n, rng);
    for (auto _ : state) {
        sll::Matrix c = sll::matmul(a, b);
        benchmark::DoNotOptimize(c.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 2 * 128 * n * n);
}

void bm_projection(benchmark::State& state) {
    const std::size_t in_dim = static_cast<std::size_t>(state.range(0));
    sll::SeededRng rng(2);
    const auto head = sll::make_projection_head(in_dim, 10, 0.9, 7);
    const sll::Matrix x = sll::gaussian_matrix(128, in_dim, rng);
    const sll::Matrix mask = sll::sample_projection_mask(head, rng);
    for (auto _ : state) {
        sll::Matrix v = sll::project(head, x, &mask);
        benchmark::DoNotOptimize(v.data.data());
    }
}

void bm_alignment_loss(benchmark::State& state) {
    const std::size_t classes = static_cast<std::size_t>(state.range(0));
    sll::SeededRng rng(3);
    const auto q = sll::BatchProbs::from_logits(sll::gaussian_matrix(128, classes, rng));
    const auto p = sll::BatchProbs::from_logits(sll::gaussian_matrix(128, classes, rng));
    for (auto _ : state) {
        sll::BcResult res = sll::bc_surrogate(q, p);
        benchmark::DoNotOptimize(res.value);
    }
}

void bm_cross_entropy(benchmark::State& state) {
    const std::size_t classes = static_cast<std::size_t>(state.range(0));
    sll::SeededRng rng(4);
    const sll::Matrix logits = sll::gaussian_matrix(128, classes, rng);
    std::vector<int> labels(128);
    for (auto& l : labels) l = static_cast<int>(rng.below(classes));
    for (auto _ : state) {
        sll::LossResult res = sll::cross_entropy(logits, labels);
        benchmark::DoNotOptimize(res.value);
    }
}

BENCHMARK(bm_matmul)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_projection)->Arg(800)->Arg(3072)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_alignment_loss)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_cross_entropy)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
