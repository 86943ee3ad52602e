// Parallel kernels against their serial reference versions.

#include <benchmark/benchmark.h>

#include <random>

#include "boxseg/kernels.hpp"
#include "boxseg/partition.hpp"
#include "boxseg/synth.hpp"

using namespace boxseg;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    return pts;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(r, c);
    for (auto& v : m.values()) v = g(rng);
    return m;
}

const Scene& bench_scene() {
    static const Scene scene = [] {
        SynthSpec spec;
        spec.rooms = 8;
        spec.objects_per_room = 8;
        return generate_synthetic_scene(spec);
    }();
    return scene;
}

void BM_Partition(benchmark::State& state) {
    const Scene& scene = bench_scene();
    for (auto _ : state) benchmark::DoNotOptimize(partition_points(scene));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(scene.points.size()));
}

void BM_PartitionReference(benchmark::State& state) {
    const Scene& scene = bench_scene();
    for (auto _ : state) benchmark::DoNotOptimize(reference::partition_points(scene));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(scene.points.size()));
}

void BM_Knn(benchmark::State& state) {
    const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(knn(pts, 8));
}

void BM_KnnReference(benchmark::State& state) {
    const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(reference::knn(pts, 8));
}

void BM_Dense(benchmark::State& state) {
    const auto in = random_matrix(static_cast<std::size_t>(state.range(0)), 128, 2);
    const auto w = random_matrix(128, 64, 3);
    const std::vector<double> b(64, 0.1);
    Matrix out;
    for (auto _ : state) {
        dense_forward(in, w, b, out, true);
        benchmark::DoNotOptimize(out.values().data());
    }
}

void BM_DenseReference(benchmark::State& state) {
    const auto in = random_matrix(static_cast<std::size_t>(state.range(0)), 128, 2);
    const auto w = random_matrix(128, 64, 3);
    const std::vector<double> b(64, 0.1);
    Matrix out;
    for (auto _ : state) {
        reference::dense_forward(in, w, b, out, true);
        benchmark::DoNotOptimize(out.values().data());
    }
}

void BM_DenseBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto in = random_matrix(n, 128, 2), d_out = random_matrix(n, 64, 4);
    const auto w = random_matrix(128, 64, 3);
    Matrix dw(128, 64), d_in;
    std::vector<double> db(64);
    for (auto _ : state) {
        dense_backward(d_out, in, w, dw, db, &d_in);
        benchmark::DoNotOptimize(d_in.values().data());
    }
}

void BM_DenseBackwardReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto in = random_matrix(n, 128, 2), d_out = random_matrix(n, 64, 4);
    const auto w = random_matrix(128, 64, 3);
    Matrix dw(128, 64), d_in;
    std::vector<double> db(64);
    for (auto _ : state) {
        reference::dense_backward(d_out, in, w, dw, db, &d_in);
        benchmark::DoNotOptimize(d_in.values().data());
    }
}

}  // namespace

BENCHMARK(BM_Partition);
BENCHMARK(BM_PartitionReference);
BENCHMARK(BM_Knn)->Arg(1000)->Arg(4000);
BENCHMARK(BM_KnnReference)->Arg(1000)->Arg(4000);
BENCHMARK(BM_Dense)->Arg(4096);
BENCHMARK(BM_DenseReference)->Arg(4096);
BENCHMARK(BM_DenseBackward)->Arg(4096);
BENCHMARK(BM_DenseBackwardReference)->Arg(4096);

BENCHMARK_MAIN();
