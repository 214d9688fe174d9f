#include <random>

#include <benchmark/benchmark.h>

#include "utad/data/preprocess.hpp"
#include "utad/eval/metrics.hpp"

using namespace utad;

namespace {

core::ImageSlice noise_image(int side, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> u(0, 1);
    core::ImageSlice s(side, side, core::IntensitySpace::Unit);
    for (auto& p : s.pixels) p = u(gen);
    return s;
}

// Solid ball of radius r in a cube of side n, centred with an offset.
eval::BinaryVolume ball(int n, double r, double offset) {
    eval::BinaryVolume v(n, n, n);
    const double c = n / 2.0 + offset;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                v.voxels[v.index(z, y, x)] = (z - c) * (z - c) + (y - c) * (y - c) + (x - c) * (x - c) <= r * r;
    return v;
}

}  // namespace

static void BM_Ssim(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const auto a = noise_image(side, 1), b = noise_image(side, 2);
    for (auto _ : state) benchmark::DoNotOptimize(eval::ssim(a, b));
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(128)->Arg(256);

static void BM_Psnr(benchmark::State& state) {
    const auto a = noise_image(128, 1), b = noise_image(128, 2);
    for (auto _ : state) benchmark::DoNotOptimize(eval::psnr(a, b));
}
BENCHMARK(BM_Psnr);

static void BM_SurfaceDistances(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = ball(n, n / 3.0, 0), b = ball(n, n / 3.5, 1.5);
    for (auto _ : state) benchmark::DoNotOptimize(eval::surface_distances(a, b, {2.0, 1.0, 1.0}));
}
BENCHMARK(BM_SurfaceDistances)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_Dice(benchmark::State& state) {
    const auto a = ball(64, 20, 0), b = ball(64, 18, 2);
    for (auto _ : state) benchmark::DoNotOptimize(eval::dsc(a, b));
}
BENCHMARK(BM_Dice);

static void BM_ResizeBilinear(benchmark::State& state) {
    const auto a = noise_image(240, 3);
    for (auto _ : state) benchmark::DoNotOptimize(data::resize_bilinear(a, 128, 128));
}
BENCHMARK(BM_ResizeBilinear);
