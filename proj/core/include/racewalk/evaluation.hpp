#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "racewalk/classifier.hpp"
#include "racewalk/gait_cycle.hpp"

namespace racewalk {

struct FoldSpec {
  std::string fold_id;
  std::string test_walker_id;
  std::vector<std::string> train_walker_ids;
};

struct TaskOptions {
  // Off: a fault task sees only {fault, Normal} samples. On: samples of the
  // other fault join as negatives (sensitivity studies).
  bool include_other_fault_as_negative = false;
};

/// Whether a sample takes part in the binary task, and its 0/1 target.
std::optional<int> task_target(FaultLabel label, FaultType fault, const TaskOptions& options = {});

std::string fold_id_for(std::string_view test_walker);
std::string test_walker_of_fold(std::string_view fold_id);

/// One fold per walker that owns at least one sample of the fault class,
/// in ascending walker order. Throws Error when fewer than two walkers qualify.
std::vector<FoldSpec> make_lowo_folds(std::span<const ProcessedCycle> samples, FaultType fault,
                                      const TaskOptions& options = {});

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  void add(bool predicted_positive, bool actual_positive);
};

struct MetricsRow {
  std::string walker_id;
  FaultType fault = FaultType::kBentKnee;
  ConfusionMatrix counts;
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f_score;
};

/// Standard accuracy/precision/recall/F; 0/0 ratios are absent.
MetricsRow compute_metrics(const ConfusionMatrix& cm);

struct FoldManifest {
  FoldSpec spec;
  std::vector<std::string> train_video_ids;
  std::vector<std::string> test_video_ids;
};

struct CvOptions {
  TrainOptions train;
  TaskOptions task;
  double threshold = 0.5;
  unsigned jobs = 1;  // folds trained concurrently; results do not depend on it
};

struct CvResult {
  FaultType fault = FaultType::kBentKnee;
  std::vector<MetricsRow> rows;
  std::vector<LogisticModel> models;
  std::vector<FoldManifest> manifests;
};

FoldManifest make_manifest(std::span<const ProcessedCycle> samples, const FoldSpec& fold,
                           FaultType fault, const TaskOptions& options = {});

LogisticModel train_fold(std::span<const ProcessedCycle> samples, const FoldManifest& manifest,
                         FaultType fault, const TrainOptions& train, const TaskOptions& task = {});

MetricsRow evaluate_fold(const LogisticModel& model, std::span<const ProcessedCycle> samples,
                         const FoldManifest& manifest, FaultType fault, double threshold,
                         const TaskOptions& task = {});

/// Leave-one-walker-out cross-validation for one fault task.
CvResult run_cv(std::span<const ProcessedCycle> samples, FaultType fault,
                const CvOptions& options = {});

// `walker_id,fault,accuracy,precision,recall,f_score`, absent values empty.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
void write_metrics_json(std::ostream& out, std::span<const MetricsRow> rows,
                        std::span<const FoldManifest> manifests,
                        std::string_view run_config_json = {});

}  // namespace racewalk
