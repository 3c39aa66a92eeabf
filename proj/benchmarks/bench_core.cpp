#include <benchmark/benchmark.h>

#include <random>

#include "halotouch/gbrt.hpp"
#include "halotouch/halocore.hpp"
#include "halotouch/mpisim.hpp"

using namespace halotouch;

namespace {

mpisim::SceneSpec bench_scene() {
    mpisim::SceneSpec s;
    s.width = 192;
    s.height = 160;
    s.noise_sigma_mm = 0.0;
    return s;
}

mpisim::FingerPose touch_pose() {
    mpisim::FingerPose p;
    p.hover_mm = 0.0;
    p.pressure = 0.5;
    return p;
}

void BM_PhasorDepth(benchmark::State& state) {
    const std::vector<mpisim::PathComponent> paths = {{1.0, 500.0}, {0.3, 540.0}};
    for (auto _ : state)
        benchmark::DoNotOptimize(mpisim::phasor_depth(paths, 50e6));
}
BENCHMARK(BM_PhasorDepth);

void BM_RenderFrame(benchmark::State& state) {
    const auto scene = bench_scene();
    const auto pose = touch_pose();
    for (auto _ : state)
        benchmark::DoNotOptimize(mpisim::render_frame(scene, pose, 1));
}
BENCHMARK(BM_RenderFrame);

void BM_RevealHalo(benchmark::State& state) {
    const auto scene = bench_scene();
    std::vector<depthio::DepthFrame> bg;
    for (uint32_t i = 0; i < 8; ++i)
        bg.push_back(mpisim::render_background_frame(scene, 1, i));
    const auto model = depthio::build_background(bg);
    const auto [frame, truth] = mpisim::render_frame(scene, touch_pose(), 1);
    for (auto _ : state) {
        auto diff = depthio::subtract_background(frame, model);
        benchmark::DoNotOptimize(halocore::reveal(diff));
    }
}
BENCHMARK(BM_RevealHalo);

void BM_GbrtPredict(benchmark::State& state) {
    gbrt::TrainingSet set;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 50.0);
    for (int i = 0; i < 2000; ++i) {
        set.features.push_back({g(rng), g(rng), 45.0 + g(rng) * 0.1, g(rng) * 0.3});
        set.targets.push_back(set.features.back()[0] * 2.0 + set.features.back()[1]);
    }
    const auto [model, log] = gbrt::fit(set, {});
    const std::vector<double> row = {10.0, -20.0, 45.0, 5.0};
    for (auto _ : state)
        benchmark::DoNotOptimize(gbrt::predict(model, row));
}
BENCHMARK(BM_GbrtPredict);

}  // namespace

BENCHMARK_MAIN();
