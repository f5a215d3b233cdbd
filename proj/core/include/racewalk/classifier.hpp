#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "racewalk/gait_cycle.hpp"

namespace racewalk {

// Dense row-major sample matrix (one row per sample).
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  void append_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  std::vector<double> apply(std::span<const double> x) const;
  FeatureMatrix apply(const FeatureMatrix& x) const;
};

/// Column means and population SDs; zero-SD columns store 1.
Standardizer fit_standardizer(const FeatureMatrix& x);

enum class FaultType : std::uint8_t { kBentKnee, kLossOfContact };

std::string_view to_string(FaultType f);  // "BK" / "LC"
FaultType parse_fault_type(std::string_view text);
FaultLabel positive_label(FaultType f);

struct TrainOptions {
  double lambda = 1.0;
  double tol = 1e-6;
  int max_iterations = 10000;
};

struct LogisticModel {
  std::vector<double> weights;  // on standardized features
  double bias = 0.0;
  Standardizer standardizer;
  std::string layout_version{kLayoutVersion};
  FaultType fault_type = FaultType::kBentKnee;
  TrainOptions hyperparameters;
  std::string training_fold_id;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> train_video_ids;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // weights first, bias last
};

/// Objective (1/n) sum log-loss + (lambda / 2n) |w|^2 and its exact gradient.
/// params holds the weights followed by the bias; x is already standardized.
LossGradient loss_and_gradient(std::span<const double> params, const FeatureMatrix& x,
                               std::span<const int> y, double lambda);

struct SolverResult {
  std::vector<double> params;
  bool converged = false;
  int iterations = 0;
  double gradient_inf_norm = 0.0;
};

/// Minimizes the objective above with a line-searched Newton-CG iteration.
/// Deterministic: fixed reduction order, no randomness.
SolverResult minimize_logistic(const FeatureMatrix& z, std::span<const int> y,
                               const TrainOptions& options,
                               std::optional<std::span<const double>> initial = std::nullopt);

/// Fits the standardizer on x, then the weights on standardized x.
/// Requires both classes (y in {0,1}) and finite features.
LogisticModel train(const FeatureMatrix& x, std::span<const int> y, const TrainOptions& options,
                    FaultType fault, std::string fold_id = "all",
                    std::optional<std::span<const double>> initial = std::nullopt);

double predict_proba(const LogisticModel& model, const FeatureVector& x);
double predict_proba(const LogisticModel& model, std::span<const double> raw);
/// True = fault detected.
bool predict(const LogisticModel& model, const FeatureVector& x, double threshold = 0.5);

struct ImportanceReport {
  std::array<double, kNumCategories> category_importance{};
  static constexpr std::size_t kBinWidth = 5;
  static constexpr std::size_t kNumBins = kCycleSamples / kBinWidth;  // 17
  std::array<std::array<double, kNumBins>, kNumChannels> frame_importance{};
  std::size_t n_models_averaged = 0;

  FeatureCategory top_category() const;
};

/// Mean |weight| over models, then averaged per category and per 5-frame bin.
ImportanceReport feature_importance(std::span<const LogisticModel> models);

void write_model_json(std::ostream& out, const LogisticModel& model,
                      std::string_view run_config_json = {});
LogisticModel read_model_json(std::istream& in);

}  // namespace racewalk
