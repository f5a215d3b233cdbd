#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "racewalk/classifier.hpp"
#include "support.hpp"

using namespace racewalk;

namespace {

struct Problem {
  FeatureMatrix x;
  std::vector<int> y;
};

// Two Gaussian blobs in p dimensions; `gap` separates the class means.
Problem blobs(std::mt19937_64& rng, std::size_t n, std::size_t p, double gap) {
  std::normal_distribution<double> g(0.0, 1.0);
  Problem pr{FeatureMatrix(n, p), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    pr.y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < p; ++j) pr.x(i, j) = g(rng) + (pr.y[i] ? gap : 0.0) * (j == 0 ? 1.0 : 0.3);
  }
  return pr;
}

LogisticModel zero_model(std::size_t p) {
  LogisticModel m;
  m.weights.assign(p, 0.0);
  m.standardizer.mean.assign(p, 0.0);
  m.standardizer.std.assign(p, 1.0);
  return m;
}

LogisticModel layout_model(std::vector<double> w, FaultType fault = FaultType::kBentKnee) {
  auto m = zero_model(kNumFeatures);
  m.weights = std::move(w);
  m.fault_type = fault;
  return m;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

TEST(Standardizer, TwoRowHandExample) {
  const auto x = FeatureMatrix::from_rows({std::vector<double>(5, 0.0), std::vector<double>(5, 2.0)});
  const auto s = fit_standardizer(x);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(s.mean[j], 1.0);
    EXPECT_EQ(s.std[j], 1.0);
  }
}

TEST(Standardizer, ConstantColumnAndMoments) {
  std::mt19937_64 rng(1);
  FeatureMatrix x(30, 4);
  for (std::size_t i = 0; i < 30; ++i) {
    x(i, 0) = 7.0;
    for (std::size_t j = 1; j < 4; ++j) x(i, j) = rwtest::uniform(rng, -5, 50);
  }
  const auto s = fit_standardizer(x);
  EXPECT_EQ(s.std[0], 1.0);
  const auto z = s.apply(x);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 30; ++i) mean += z(i, j);
    mean /= 30.0;
    for (std::size_t i = 0; i < 30; ++i) sq += (z(i, j) - mean) * (z(i, j) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    if (j == 0) {
      for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(z(i, 0), 0.0);
    } else {
      EXPECT_NEAR(std::sqrt(sq / 30.0), 1.0, 1e-12);
    }
  }
  EXPECT_RW_ERROR(fit_standardizer(FeatureMatrix(1, 3)), "at least 2");
}

TEST(LossGradient, ZeroParametersGiveLn2AndHalfProbability) {
  std::mt19937_64 rng(2);
  auto pr = blobs(rng, 10, 3, 1.0);
  const std::vector<double> zero(4, 0.0);
  const auto lg = loss_and_gradient(zero, pr.x, pr.y, 0.0);
  EXPECT_NEAR(lg.loss, std::numbers::ln2, 1e-15);
  // Balanced labels: the bias gradient is mean(0.5 - y) = 0.
  EXPECT_EQ(lg.gradient.back(), 0.0);
  const auto m = zero_model(3);
  for (std::size_t i = 0; i < pr.x.rows(); ++i) EXPECT_EQ(predict_proba(m, pr.x.row(i)), 0.5);
}

TEST(LossGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 49, p = 1 + rng() % 40;
    FeatureMatrix x(n, p);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      for (std::size_t j = 0; j < p; ++j) x(i, j) = g(rng);
    }
    std::vector<double> params(p + 1);
    for (auto& v : params) v = 0.5 * g(rng);
    const double lambda = rwtest::uniform(rng, 0.0, 2.0);
    const auto lg = loss_and_gradient(params, x, y, lambda);
    const auto fd = oracle::central_difference(
        [&](std::span<const double> q) { return loss_and_gradient(q, x, y, lambda).loss; }, params);
    EXPECT_LE(oracle::relative_error(lg.gradient, fd), 1e-5) << "n=" << n << " p=" << p;
  }
}

TEST(LossGradient, ShapeMismatch) {
  FeatureMatrix x(3, 2);
  const std::vector<int> y{0, 1, 0};
  EXPECT_RW_ERROR(loss_and_gradient(std::vector<double>(2, 0.0), x, y, 1.0), "shape mismatch");
  EXPECT_RW_ERROR(loss_and_gradient(std::vector<double>(3, 0.0), x, std::vector<int>{0, 1}, 1.0),
                  "shape mismatch");
}

TEST(Train, OneFeatureMatchesGridOracle) {
  const auto x = FeatureMatrix::from_rows({{-1.0}, {1.0}});
  const std::vector<int> y{0, 1};
  const auto model = train(x, y, {.lambda = 0.1, .tol = 1e-10}, FaultType::kBentKnee);
  ASSERT_TRUE(model.converged);
  const oracle::OneFeatureLogistic f{oracle::zscore({-1.0, 1.0}), y, 0.1};
  const auto best = oracle::grid_refine(std::cref(f));
  EXPECT_NEAR(model.weights[0], best.w, 1e-6);
  EXPECT_NEAR(model.bias, best.b, 1e-6);
}

TEST(Train, RandomTwoParameterProblemsMatchGridOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 4 + rng() % 27;
    std::vector<double> raw(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] = 3.0 * g(rng) + 10.0;
      y[i] = rwtest::uniform(rng, 0, 1) < 1.0 / (1.0 + std::exp(-(raw[i] - 10.0))) ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    const double lambda = rwtest::uniform(rng, 0.1, 2.0);
    FeatureMatrix x(n, 1);
    for (std::size_t i = 0; i < n; ++i) x(i, 0) = raw[i];
    const auto model = train(x, y, {.lambda = lambda, .tol = 1e-10}, FaultType::kLossOfContact);
    ASSERT_TRUE(model.converged);
    const oracle::OneFeatureLogistic f{oracle::zscore(raw), y, lambda};
    const auto best = oracle::grid_refine(std::cref(f));
    EXPECT_NEAR(model.weights[0], best.w, 1e-6) << "trial " << trial;
    EXPECT_NEAR(model.bias, best.b, 1e-6) << "trial " << trial;
  }
}

// The penalty is lambda / (2n) * |w|^2, so doubling every row halves its weight
// against the averaged loss. Duplication is neutral without a penalty, or when
// lambda doubles along with n.
TEST(Train, DuplicatedRowsKeepTheOptimum) {
  std::mt19937_64 rng(5);
  const auto pr = blobs(rng, 60, 2, 0.5);
  FeatureMatrix doubled = pr.x;
  std::vector<int> y2 = pr.y;
  for (std::size_t i = 0; i < pr.x.rows(); ++i) {
    doubled.append_row(pr.x.row(i));
    y2.push_back(pr.y[i]);
  }
  for (double lambda : {0.0, 1.0}) {
    const auto a = train(pr.x, pr.y, {.lambda = lambda, .tol = 1e-10}, FaultType::kBentKnee);
    const auto b = train(doubled, y2, {.lambda = 2.0 * lambda, .tol = 1e-10}, FaultType::kBentKnee);
    ASSERT_TRUE(a.converged && b.converged);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-6) << lambda;
    EXPECT_NEAR(a.bias, b.bias, 1e-6) << lambda;
  }
}

TEST(Train, SeparableSetIsReproduced) {
  std::mt19937_64 rng(6);
  const auto pr = blobs(rng, 40, 10, 8.0);
  const auto model = train(pr.x, pr.y, {}, FaultType::kBentKnee);
  EXPECT_TRUE(model.converged);
  for (std::size_t i = 0; i < pr.x.rows(); ++i) {
    EXPECT_EQ(predict_proba(model, pr.x.row(i)) >= 0.5, pr.y[i] == 1) << "row " << i;
  }
}

TEST(Train, DeterministicBitForBit) {
  std::mt19937_64 rng(7);
  const auto pr = blobs(rng, 30, 25, 1.0);
  const auto a = train(pr.x, pr.y, {}, FaultType::kBentKnee);
  const auto b = train(pr.x, pr.y, {}, FaultType::kBentKnee);
  ASSERT_EQ(a.weights.size(), b.weights.size());
  for (std::size_t j = 0; j < a.weights.size(); ++j) EXPECT_TRUE(same_bits(a.weights[j], b.weights[j]));
  EXPECT_TRUE(same_bits(a.bias, b.bias));
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Train, DifferentStartsConvergeTogether) {
  std::mt19937_64 rng(8);
  const auto pr = blobs(rng, 30, 8, 1.0);
  const TrainOptions opts{};
  const auto a = train(pr.x, pr.y, opts, FaultType::kBentKnee);
  std::vector<double> start(9);
  for (auto& v : start) v = rwtest::uniform(rng, -3, 3);
  const auto b = train(pr.x, pr.y, opts, FaultType::kBentKnee, "all", start);
  ASSERT_TRUE(a.converged && b.converged);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 10 * opts.tol);
  EXPECT_NEAR(a.bias, b.bias, 10 * opts.tol);
}

TEST(Train, UniformRescalingLeavesPredictionsUnchanged) {
  std::mt19937_64 rng(9);
  const auto pr = blobs(rng, 30, 5, 1.2);
  const auto test = blobs(rng, 20, 5, 1.2);
  for (double c : {1e-3, 0.37, 4.0, 250.0}) {
    FeatureMatrix xs = pr.x, ts = test.x;
    for (std::size_t i = 0; i < xs.rows(); ++i) for (auto& v : xs.row(i)) v *= c;
    for (std::size_t i = 0; i < ts.rows(); ++i) for (auto& v : ts.row(i)) v *= c;
    const auto a = train(pr.x, pr.y, {}, FaultType::kBentKnee);
    const auto b = train(xs, pr.y, {}, FaultType::kBentKnee);
    for (std::size_t i = 0; i < ts.rows(); ++i) {
      const double pa = predict_proba(a, test.x.row(i));
      const double pb = predict_proba(b, ts.row(i));
      EXPECT_NEAR(pa, pb, 1e-9);
    }
  }
}

TEST(Train, InputErrors) {
  const auto x = FeatureMatrix::from_rows({{1.0}, {2.0}, {3.0}});
  EXPECT_RW_ERROR(train(x, std::vector<int>{1, 1, 1}, {}, FaultType::kBentKnee), "single-class");
  auto bad = x;
  bad(1, 0) = NAN;
  EXPECT_RW_ERROR(train(bad, std::vector<int>{0, 1, 1}, {}, FaultType::kBentKnee), "non-finite");
  EXPECT_RW_ERROR(train(x, std::vector<int>{0, 1}, {}, FaultType::kBentKnee), "shape mismatch");
}

TEST(Predict, ZeroModelAndMonotonicity) {
  auto m = zero_model(3);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x{rwtest::uniform(rng, -9, 9), rwtest::uniform(rng, -9, 9), 0.0};
    EXPECT_EQ(predict_proba(m, x), 0.5);
  }
  m.weights = {1.5, 0.0, 0.0};
  double previous = 0.0;
  for (double v = -10.0; v <= 10.0; v += 0.25) {
    const double p = predict_proba(m, std::vector<double>{v, 0.0, 0.0});
    EXPECT_GT(p, previous);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    previous = p;
  }
}

TEST(Predict, ThresholdAndLayout) {
  auto m = layout_model(std::vector<double>(kNumFeatures, 0.0));
  m.bias = 0.3;
  FeatureVector x{std::vector<double>(kNumFeatures, 0.0)};
  EXPECT_TRUE(predict(m, x));
  EXPECT_FALSE(predict(m, x, 0.6));
  x.layout_version = "v2";
  EXPECT_RW_ERROR(predict_proba(m, x), "layout mismatch");
}

TEST(Importance, KneeAngleOnlyModel) {
  std::vector<double> w(kNumFeatures, 0.0);
  for (std::size_t f = 0; f < kCycleSamples; ++f) w[feature_index(17, f)] = 0.5;
  const std::vector<LogisticModel> models{layout_model(w)};
  const auto r = feature_importance(models);
  EXPECT_EQ(r.n_models_averaged, 1u);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (static_cast<FeatureCategory>(c) == FeatureCategory::kKneeAngle) {
      EXPECT_DOUBLE_EQ(r.category_importance[c], 0.25);  // half of its 170 features carry 0.5
    } else {
      EXPECT_EQ(r.category_importance[c], 0.0);
    }
  }
  EXPECT_EQ(r.top_category(), FeatureCategory::kKneeAngle);
  for (std::size_t b = 0; b < ImportanceReport::kNumBins; ++b) {
    EXPECT_DOUBLE_EQ(r.frame_importance[17][b], 0.5);
    EXPECT_EQ(r.frame_importance[16][b], 0.0);
  }
}

TEST(Importance, AbsoluteValuesAreAveraged) {
  std::mt19937_64 rng(11);
  std::vector<double> w(kNumFeatures);
  for (auto& v : w) v = rwtest::uniform(rng, -1, 1);
  std::vector<double> neg = w;
  for (auto& v : neg) v = -v;
  const std::vector<LogisticModel> models{layout_model(w), layout_model(neg)};
  const std::vector<LogisticModel> single{layout_model(w)};
  const auto a = feature_importance(models);
  const auto b = feature_importance(single);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    EXPECT_NEAR(a.category_importance[c], b.category_importance[c], 1e-15);
    EXPECT_GE(a.category_importance[c], 0.0);
  }
  // Bin value = mean |w| over its 5 frames.
  for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
    for (std::size_t bin = 0; bin < ImportanceReport::kNumBins; ++bin) {
      double s = 0.0;
      for (std::size_t f = 5 * bin; f < 5 * bin + 5; ++f) s += std::abs(w[feature_index(ch, f)]);
      EXPECT_NEAR(a.frame_importance[ch][bin], s / 5.0, 1e-15);
    }
  }
}

TEST(Importance, Errors) {
  EXPECT_RW_ERROR(feature_importance(std::vector<LogisticModel>{}), "empty model list");
  auto a = layout_model(std::vector<double>(kNumFeatures, 0.1));
  auto b = a;
  b.layout_version = "v0";
  EXPECT_RW_ERROR(feature_importance(std::vector<LogisticModel>{a, b}), "mixed layouts");
}

TEST(ModelJson, BitExactRoundTrip) {
  std::mt19937_64 rng(12);
  const auto pr = blobs(rng, 20, 7, 1.0);
  auto model = train(pr.x, pr.y, {.lambda = 0.3, .tol = 1e-8, .max_iterations = 500},
                     FaultType::kLossOfContact, "lowo-C");
  model.train_video_ids = {"a", "b"};
  model.weights[0] = 0.1;
  model.weights[1] = -1e-310;
  std::stringstream ss;
  write_model_json(ss, model, R"({"lambda":0.3})");
  const std::string text = ss.str();
  const auto back = read_model_json(ss);
  ASSERT_EQ(back.weights.size(), model.weights.size());
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    EXPECT_TRUE(same_bits(back.weights[j], model.weights[j]));
    EXPECT_TRUE(same_bits(back.standardizer.mean[j], model.standardizer.mean[j]));
    EXPECT_TRUE(same_bits(back.standardizer.std[j], model.standardizer.std[j]));
  }
  EXPECT_TRUE(same_bits(back.bias, model.bias));
  EXPECT_EQ(back.fault_type, FaultType::kLossOfContact);
  EXPECT_EQ(back.training_fold_id, "lowo-C");
  EXPECT_EQ(back.hyperparameters.lambda, 0.3);
  EXPECT_EQ(back.hyperparameters.max_iterations, 500);
  EXPECT_EQ(back.converged, model.converged);
  EXPECT_EQ(back.iterations, model.iterations);
  EXPECT_EQ(back.train_video_ids, model.train_video_ids);
  std::stringstream again;
  write_model_json(again, back, R"({"lambda":0.3})");
  EXPECT_EQ(again.str(), text);
}

TEST(ModelJson, RejectsForeignLayout) {
  std::stringstream ss;
  write_model_json(ss, layout_model(std::vector<double>(kNumFeatures, 0.0)));
  std::string text = ss.str();
  const auto at = text.find("\"v1\"");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 4, "\"v9\"");
  std::istringstream in(text);
  EXPECT_RW_ERROR(read_model_json(in), "layout mismatch");
  std::istringstream junk("{\"weights\": 3}");
  EXPECT_RW_ERROR(read_model_json(junk), "malformed model file");
}

TEST(FaultTypeText, Parse) {
  EXPECT_EQ(parse_fault_type("BK"), FaultType::kBentKnee);
  EXPECT_EQ(parse_fault_type("lc"), FaultType::kLossOfContact);
  EXPECT_EQ(to_string(FaultType::kLossOfContact), "LC");
  EXPECT_EQ(positive_label(FaultType::kBentKnee), FaultLabel::kBentKnee);
  EXPECT_RW_ERROR(parse_fault_type("XX"), "unknown fault type");
}
