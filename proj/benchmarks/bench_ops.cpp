#include <benchmark/benchmark.h>

#include "intrakd/aoi.hpp"
#include "intrakd/distill.hpp"
#include "intrakd/model.hpp"
#include "intrakd/ops.hpp"
#include "intrakd/rng.hpp"
#include "intrakd/scene.hpp"

using namespace intrakd;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_Conv2d(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const auto channels = static_cast<std::size_t>(state.range(1));
    Rng rng(1);
    const Tensor x = random_tensor(rng, {size, size, channels});
    const Tensor k = random_tensor(rng, {3, 3, channels, channels});
    const Tensor b = random_tensor(rng, {channels});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b, 1, 1));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size * channels * channels * 9));
}
BENCHMARK(BM_Conv2d)->Args({32, 8})->Args({32, 16})->Args({64, 16});

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(2);
    const Tensor x = random_tensor(rng, {32, 32, 16});
    const Tensor k = random_tensor(rng, {3, 3, 16, 16});
    const Tensor up = random_tensor(rng, {32, 32, 16});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(x, k, up, 1, 1));
}
BENCHMARK(BM_Conv2dBackward);

AoiMasks scene_aoi(std::size_t h_f, std::size_t w_f) {
    const SceneSample s = generate_scene(default_scene_spec(), 3);
    return downsample_aoi(generate_aoi(one_hot(s.target, 4)), h_f, w_f);
}

void BM_MomentPool(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    const Tensor f = random_tensor(rng, {size, size, 16});
    const AoiMasks aoi = scene_aoi(size, size);
    for (auto _ : state) benchmark::DoNotOptimize(moment_pool(f, aoi));
}
BENCHMARK(BM_MomentPool)->Arg(16)->Arg(32);

void BM_AffinityGraph(benchmark::State& state) {
    Rng rng(5);
    const AoiMasks aoi = scene_aoi(16, 16);
    const MomentSet m = moment_pool(random_tensor(rng, {16, 16, 16}), aoi);
    for (auto _ : state) benchmark::DoNotOptimize(build_affinity_graph(m));
}
BENCHMARK(BM_AffinityGraph);

void BM_TrainStep(benchmark::State& state) {
    const bool distill = state.range(0) != 0;
    const SceneSample s = generate_scene(default_scene_spec(), 7);
    const AoiMasks aoi = generate_aoi(one_hot(s.target, 4));
    const Network teacher = build_network(default_teacher_config());
    Network student = build_network(default_student_config());
    const auto [ho, wo] = output_extent(student.config(), 64, 64);
    const ClassMap target = downsample_target(s.target, ho, wo);
    const TapPairing pairing{{{0, 0}, {1, 1}}};
    const TeacherTargets t = make_teacher_targets(teacher, s.image, aoi, pairing);
    LossConfig loss;
    loss.class_weights = background_weighted(4, 0.4);
    loss.affinity = loss.attention = distill;
    for (auto _ : state)
        benchmark::DoNotOptimize(train_step(student, s.image, target, aoi, distill ? &t : nullptr, pairing, loss, 1e-3, 10.0));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
