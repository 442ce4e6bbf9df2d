#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "nevo/kernels.hpp"
#include "nevo/rng.hpp"

namespace k = nevo::kernels;
using nevo::Rng;

namespace {

// Trainer-sized geometry: 28x28 input, 14x14 feature map, batch 50.
constexpr int kInX = 28, kInY = 28;
constexpr int kOutX = 14, kOutY = 14;
constexpr int kFX = kInX - kOutX + 1, kFY = kInY - kOutY + 1;
constexpr int kBatch = 50;

struct Buffers {
    std::vector<double> in, out, w, d_in, d_out, d_w;
    std::vector<int> part_x, part_y, argmax;

    Buffers() {
        Rng rng(7);
        auto fill = [&rng](std::vector<double>& v, std::size_t n) {
            v.resize(n);
            for (double& x : v) x = rng.uniform(-1.0, 1.0);
        };
        fill(in, static_cast<std::size_t>(kBatch) * kInY * kInX);
        fill(out, static_cast<std::size_t>(kBatch) * kOutY * kOutX);
        fill(w, static_cast<std::size_t>(kFY) * kFX);
        fill(d_in, in.size());
        fill(d_out, out.size());
        d_w.assign(w.size(), 0.0);
        part_x = k::canonical_partition(kInX, kOutX);
        part_y = k::canonical_partition(kInY, kOutY);
        argmax.assign(out.size(), 0);
    }
};

Buffers& bufs() {
    static Buffers b;
    return b;
}

} // namespace

static void BM_ConvForwardSerial(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::serial::conv_forward(b.in.data(), kInX, kInY, b.out.data(), kOutX,
                                kOutY, b.w.data(), kFX, kFY, kBatch);
        benchmark::DoNotOptimize(b.out.data());
    }
}
BENCHMARK(BM_ConvForwardSerial);

static void BM_ConvForwardParallel(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::conv_forward(b.in.data(), kInX, kInY, b.out.data(), kOutX, kOutY,
                        b.w.data(), kFX, kFY, kBatch);
        benchmark::DoNotOptimize(b.out.data());
    }
}
BENCHMARK(BM_ConvForwardParallel);

static void BM_ConvBackwardInputSerial(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::serial::conv_backward_input(b.d_in.data(), kInX, kInY,
                                       b.d_out.data(), kOutX, kOutY, b.w.data(),
                                       kFX, kFY, kBatch);
        benchmark::DoNotOptimize(b.d_in.data());
    }
}
BENCHMARK(BM_ConvBackwardInputSerial);

static void BM_ConvBackwardInputParallel(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::conv_backward_input(b.d_in.data(), kInX, kInY, b.d_out.data(), kOutX,
                               kOutY, b.w.data(), kFX, kFY, kBatch);
        benchmark::DoNotOptimize(b.d_in.data());
    }
}
BENCHMARK(BM_ConvBackwardInputParallel);

static void BM_ConvBackwardWeightsSerial(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::serial::conv_backward_weights(b.in.data(), kInX, kInY,
                                         b.d_out.data(), kOutX, kOutY,
                                         b.d_w.data(), kFX, kFY, kBatch);
        benchmark::DoNotOptimize(b.d_w.data());
    }
}
BENCHMARK(BM_ConvBackwardWeightsSerial);

static void BM_ConvBackwardWeightsParallel(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::conv_backward_weights(b.in.data(), kInX, kInY, b.d_out.data(), kOutX,
                                 kOutY, b.d_w.data(), kFX, kFY, kBatch);
        benchmark::DoNotOptimize(b.d_w.data());
    }
}
BENCHMARK(BM_ConvBackwardWeightsParallel);

static void BM_PoolForwardSerial(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::serial::pool_forward(b.in.data(), kInX, kInY, b.out.data(), kOutX,
                                kOutY, b.part_x.data(), b.part_y.data(), 1.0,
                                kBatch, b.argmax.data());
        benchmark::DoNotOptimize(b.out.data());
    }
}
BENCHMARK(BM_PoolForwardSerial);

static void BM_PoolForwardParallel(benchmark::State& state) {
    Buffers& b = bufs();
    for (auto _ : state) {
        k::pool_forward(b.in.data(), kInX, kInY, b.out.data(), kOutX, kOutY,
                        b.part_x.data(), b.part_y.data(), 1.0, kBatch,
                        b.argmax.data());
        benchmark::DoNotOptimize(b.out.data());
    }
}
BENCHMARK(BM_PoolForwardParallel);

BENCHMARK_MAIN();
