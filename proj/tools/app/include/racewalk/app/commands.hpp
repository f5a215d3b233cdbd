#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "racewalk/classifier.hpp"
#include "racewalk/evaluation.hpp"
#include "racewalk/gait_cycle.hpp"
#include "racewalk/pose_data.hpp"
#include "racewalk/preprocess.hpp"

namespace racewalk::app {

// Every tunable constant of a run. Command-line flags are the kebab-case
// spelling of these fields (outlier_sd_mult -> --outlier-sd-mult).
struct RunConfig {
  double outlier_sd_mult = kDefaultOutlierSdMultiplier;
  double min_prominence_deg = 20.0;
  std::size_t min_separation_frames = 30;
  double lambda = 1.0;
  double tol = 1e-6;
  int max_iter = 10000;
  double threshold = 0.5;
  bool include_other_fault_as_negative = false;
  unsigned jobs = 1;

  /// Throws Error when a field is out of range.
  void validate() const;
  CycleDetectionOptions cycle_options() const;
  CvOptions cv_options() const;
  /// Compact JSON object with every field, in declaration order.
  std::string to_json() const;
};

/// Flat `key = value` document; '#' starts a comment, blank lines are
/// skipped. Keys are returned in kebab-case (underscores become dashes).
std::map<std::string, std::string> parse_flat_config(std::istream& in);

/// Sets one RunConfig field from its kebab-case flag name. Throws Error on
/// an unknown key or an unparsable value.
void set_config_field(RunConfig& config, std::string_view key, std::string_view value);

/// Names accepted by set_config_field.
std::vector<std::string> config_keys();

enum class ExitCode : int { kSuccess = 0, kPartial = 1, kFatal = 2 };

enum class Disposition { kKept, kRemovedOutlier, kFailed, kUnresolved, kUnlabeled };
std::string_view to_string(Disposition d);

struct VideoDisposition {
  std::string video_id;
  std::string walker_id;
  std::string label;  // resolved label or empty
  Disposition status = Disposition::kKept;
  std::string reason;
};

struct ProcessResult {
  std::vector<ProcessedCycle> cycles;  // sorted by video_id
  std::vector<VideoDisposition> dispositions;
  OutlierScreenReport screen;
};

/// Normalization, knee angles, outlier screen, cycle extraction and feature
/// assembly over an assembled dataset. Per-video failures are recorded, not thrown.
ProcessResult process_dataset(const AssembledDataset& assembled, const RunConfig& config);

struct ProcessArgs {
  std::vector<std::filesystem::path> inputs;  // keypoint files and/or directories of *.json
  std::filesystem::path labels;
  std::filesystem::path out;                  // processed-cycles CSV
  std::optional<std::filesystem::path> report;  // defaults to <out>.report.csv
};
ExitCode cmd_process(const ProcessArgs& args, const RunConfig& config, std::ostream& log);

struct TrainArgs {
  std::filesystem::path processed;
  FaultType fault = FaultType::kBentKnee;
  std::filesystem::path out_dir;
};
/// One model file per leave-one-walker-out fold: <out_dir>/<fault>_<fold_id>.json.
ExitCode cmd_train(const TrainArgs& args, const RunConfig& config, std::ostream& log);

struct EvalArgs {
  std::filesystem::path processed;
  FaultType fault = FaultType::kBentKnee;
  std::optional<std::filesystem::path> models_dir;  // reuse trained fold models
  std::filesystem::path out_csv;
  std::optional<std::filesystem::path> out_json;
};
ExitCode cmd_eval(const EvalArgs& args, const RunConfig& config, std::ostream& log);

struct ImportanceArgs {
  std::filesystem::path models_dir;
  FaultType fault = FaultType::kBentKnee;
  std::filesystem::path out_prefix;  // <prefix>_categories.csv, <prefix>_frames.csv
};
ExitCode cmd_importance(const ImportanceArgs& args, const RunConfig& config, std::ostream& log);

struct PoseEvalArgs {
  std::filesystem::path predictions;  // keypoint JSON
  std::filesystem::path ground_truth;
  std::optional<std::filesystem::path> constants;
};
ExitCode cmd_pose_eval(const PoseEvalArgs& args, std::ostream& log);

struct SynthArgs {
  std::filesystem::path out_dir;
  std::size_t walkers = 4;
  std::size_t samples_per_class = 15;
  std::uint64_t seed = 1;
  double bk_severity = 15.0;
  double lc_lift = 0.1;
  double noise = 1.5;
  std::size_t n_frames = 150;
  double cycle_frames = 70.0;
};
ExitCode cmd_synth(const SynthArgs& args, std::ostream& log);

/// Fold models for one fault found in a directory, in fold order.
std::vector<LogisticModel> load_fold_models(const std::filesystem::path& dir, FaultType fault);

}  // namespace racewalk::app
