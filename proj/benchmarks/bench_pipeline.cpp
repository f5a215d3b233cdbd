#include <benchmark/benchmark.h>

#include "racewalk/gait_cycle.hpp"
#include "racewalk/synth.hpp"

using namespace racewalk;

namespace {

PoseSequence sample(std::size_t frames) {
  GaitParams p;
  p.n_frames = frames;
  p.seed = 5;
  return generate_sequence(p).sequence;
}

}  // namespace

static void BM_GenerateSequence(benchmark::State& state) {
  GaitParams p;
  p.n_frames = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_sequence(p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateSequence)->Arg(150)->Arg(600);

// Normalization, knee angles, cycle detection and resampling for one video.
static void BM_ProcessVideo(benchmark::State& state) {
  const auto seq = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto n = normalize_sequence(seq);
    const auto w = detect_cycle(n.right_knee.theta);
    benchmark::DoNotOptimize(assemble_features(build_channel_matrix(n, w)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProcessVideo)->Arg(150)->Arg(600);

static void BM_Resample(benchmark::State& state) {
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i % 17);
  for (auto _ : state) benchmark::DoNotOptimize(resample(s));
}
BENCHMARK(BM_Resample)->Arg(70)->Arg(300);
BENCHMARK_MAIN();
