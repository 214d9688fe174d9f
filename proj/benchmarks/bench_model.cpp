#include <benchmark/benchmark.h>

#include "utad/model/networks.hpp"
#include "utad/model/tensors.hpp"

using namespace utad;

namespace {

core::ExperimentConfig bench_config(int resolution, int base) {
    core::ExperimentConfig c;
    c.resolution = resolution;
    c.base_channels = base;
    c.critic_channels = base;
    c.depth = resolution >= 128 ? 4 : 3;
    return c;
}

}  // namespace

static void BM_TeacherForward(benchmark::State& state) {
    torch::set_num_threads(1);
    const int res = static_cast<int>(state.range(0)), base = static_cast<int>(state.range(1));
    auto nets = model::NetworkSet::create(bench_config(res, base), model::Role::Teacher, 0);
    nets.eval();
    torch::NoGradGuard ng;
    const auto x = torch::rand({4, 1, res, res}) * 2 - 1;
    const auto t = model::one_hot_condition(model::modality_indices(core::Modality::T2, 4));
    for (auto _ : state) benchmark::DoNotOptimize(model::teacher_forward(nets.generator, x, x, t).whole);
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_TeacherForward)->Args({32, 16})->Args({128, 16})->Unit(benchmark::kMillisecond);

static void BM_CriticForward(benchmark::State& state) {
    torch::set_num_threads(1);
    const int res = static_cast<int>(state.range(0));
    auto nets = model::NetworkSet::create(bench_config(res, 16), model::Role::Teacher, 0);
    torch::NoGradGuard ng;
    const auto x = torch::rand({4, 1, res, res}) * 2 - 1;
    for (auto _ : state) benchmark::DoNotOptimize(nets.global_critic->forward(x).src_map);
}
BENCHMARK(BM_CriticForward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
