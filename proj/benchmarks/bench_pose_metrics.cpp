#include <benchmark/benchmark.h>

#include <random>

#include "racewalk/pose_metrics.hpp"

using namespace racewalk;

static void BM_MeanAp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 500.0), jitter(-8.0, 8.0);
  std::vector<Pose> preds(n);
  std::vector<GroundTruthPose> gts(n);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      gts[f].keypoints[i] = {u(rng), u(rng)};
      gts[f].visibility[i] = 2;
      preds[f].keypoints[i] = {gts[f].keypoints[i].x + jitter(rng), gts[f].keypoints[i].y + jitter(rng), 1.0};
    }
    gts[f].scale = 200.0;
  }
  const auto k = KeypointConstants::coco();
  for (auto _ : state) benchmark::DoNotOptimize(mean_ap(preds, gts, k));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_MeanAp)->Arg(100)->Arg(10000);
