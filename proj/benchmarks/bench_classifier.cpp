#include <benchmark/benchmark.h>

#include <random>

#include "racewalk/classifier.hpp"

using namespace racewalk;

namespace {

struct Data {
  FeatureMatrix x;
  std::vector<int> y;
};

// n rows of the full 1530-feature layout with a weak class signal.
Data make_data(std::size_t n) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  Data d{FeatureMatrix(n, kNumFeatures), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < kNumFeatures; ++j) d.x(i, j) = g(rng) + (d.y[i] && j < 85 ? 1.0 : 0.0);
  }
  return d;
}

}  // namespace

static void BM_LossAndGradient(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> params(kNumFeatures + 1, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(params, d.x, d.y, 1.0));
}
BENCHMARK(BM_LossAndGradient)->Arg(45)->Arg(180);

// One leave-one-walker-out fold is roughly 45 training rows per task.
static void BM_Train(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(train(d.x, d.y, {}, FaultType::kBentKnee));
}
BENCHMARK(BM_Train)->Arg(45)->Arg(180)->Unit(benchmark::kMillisecond);
