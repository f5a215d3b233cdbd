// racewalk: race-walking fault detection pipeline.
//
//   racewalk synth      --out DIR
//   racewalk process    --keypoints DIR --labels labels.csv --out processed.csv
//   racewalk train      --processed processed.csv --fault bk --out-dir models/
//   racewalk eval       --processed processed.csv --fault bk --out metrics.csv [--models models/]
//   racewalk importance --models models/ --fault bk --out-prefix reports/bk
//   racewalk pose-eval  --pred pred.json --gt gt.json [--constants k.json]

#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "racewalk/app/commands.hpp"
#include "racewalk/error.hpp"

namespace {

using racewalk::app::ExitCode;
using racewalk::app::RunConfig;

// Registers every RunConfig field as a kebab-case flag on `cmd`.
std::map<std::string, CLI::Option*> add_config_flags(CLI::App& cmd, RunConfig& cfg) {
  std::map<std::string, CLI::Option*> b;
  const auto bind = [&](const std::string& name, auto& field, const std::string& help) {
    b[name] = cmd.add_option("--" + name, field, help)->capture_default_str();
  };
  bind("outlier-sd-mult", cfg.outlier_sd_mult, "Outlier screen multiplier k (k x pooled SD)");
  bind("min-prominence-deg", cfg.min_prominence_deg, "Minimum knee-angle trough prominence");
  bind("min-separation-frames", cfg.min_separation_frames, "Minimum frames between troughs");
  bind("lambda", cfg.lambda, "L2 regularization strength");
  bind("tol", cfg.tol, "Gradient infinity-norm convergence tolerance");
  bind("max-iter", cfg.max_iter, "Maximum solver iterations");
  bind("threshold", cfg.threshold, "Decision threshold on the fault probability");
  bind("jobs", cfg.jobs, "Folds trained concurrently");
  b["include-other-fault-as-negative"] =
      cmd.add_flag("--include-other-fault-as-negative", cfg.include_other_fault_as_negative,
                   "Use the other fault's samples as negatives");
  return b;
}

// Config-file values fill in only the fields not given as flags.
void apply_config_file(const std::string& path, const std::map<std::string, CLI::Option*>& flags,
                       RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw racewalk::Error("cannot open config file '" + path + "'");
  for (const auto& [key, value] : racewalk::app::parse_flat_config(in)) {
    const auto it = flags.find(key);
    if (it == flags.end() || it->second->count() == 0) racewalk::app::set_config_field(cfg, key, value);
  }
}

racewalk::FaultType fault_of(const std::string& s) { return racewalk::parse_fault_type(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Race-walking fault detection from 2D keypoint sequences"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::map<CLI::App*, std::map<std::string, CLI::Option*>> bindings;
  const auto with_config = [&](CLI::App* cmd) {
    bindings[cmd] = add_config_flags(*cmd, cfg);
    cmd->add_option("--config", config_path, "Flat key=value config file");
  };

  racewalk::app::ProcessArgs process_args;
  std::vector<std::string> inputs;
  std::string labels, out, report;
  auto* process = app.add_subcommand("process", "Keypoint files -> processed-cycles CSV");
  process->add_option("--keypoints", inputs, "Keypoint JSON files or directories")->required();
  process->add_option("--labels", labels, "Labels CSV")->required();
  process->add_option("--out", out, "Processed-cycles CSV")->required();
  process->add_option("--report", report, "Per-video disposition CSV");
  with_config(process);

  std::string processed, fault = "bk", out_dir, models, out_json, out_prefix;
  auto* train = app.add_subcommand("train", "Train one model per leave-one-walker-out fold");
  train->add_option("--processed", processed)->required();
  train->add_option("--fault", fault, "bk or lc")->required();
  train->add_option("--out-dir", out_dir)->required();
  with_config(train);

  auto* eval = app.add_subcommand("eval", "Leave-one-walker-out metrics table");
  eval->add_option("--processed", processed)->required();
  eval->add_option("--fault", fault, "bk or lc")->required();
  eval->add_option("--models", models, "Evaluate previously trained fold models");
  eval->add_option("--out", out, "Metrics CSV")->required();
  eval->add_option("--json", out_json, "Metrics JSON with fold manifests");
  with_config(eval);

  auto* importance = app.add_subcommand("importance", "Category and frame-bin importance");
  importance->add_option("--models", models)->required();
  importance->add_option("--fault", fault, "bk or lc")->required();
  importance->add_option("--out-prefix", out_prefix)->required();
  with_config(importance);

  std::string pred, gt, constants;
  auto* pose_eval = app.add_subcommand("pose-eval", "OKS, AP and mAP of predicted keypoints");
  pose_eval->add_option("--pred", pred)->required();
  pose_eval->add_option("--gt", gt)->required();
  pose_eval->add_option("--constants", constants, "Per-keypoint constants JSON");

  racewalk::app::SynthArgs synth_args;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic race-walk dataset");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--walkers", synth_args.walkers)->capture_default_str();
  synth->add_option("--samples-per-class", synth_args.samples_per_class)->capture_default_str();
  synth->add_option("--seed", synth_args.seed)->capture_default_str();
  synth->add_option("--bk-severity", synth_args.bk_severity, "Degrees")->capture_default_str();
  synth->add_option("--lc-lift", synth_args.lc_lift, "Body lengths")->capture_default_str();
  synth->add_option("--noise", synth_args.noise, "Pixel noise SD")->capture_default_str();
  synth->add_option("--n-frames", synth_args.n_frames)->capture_default_str();
  synth->add_option("--cycle-frames", synth_args.cycle_frames)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& [cmd, b] : bindings) {
      if (cmd->parsed() && !config_path.empty()) apply_config_file(config_path, b, cfg);
    }
    ExitCode code = ExitCode::kSuccess;
    if (process->parsed()) {
      for (const auto& i : inputs) process_args.inputs.emplace_back(i);
      process_args.labels = labels;
      process_args.out = out;
      if (!report.empty()) process_args.report = report;
      code = racewalk::app::cmd_process(process_args, cfg, std::cout);
    } else if (train->parsed()) {
      code = racewalk::app::cmd_train({processed, fault_of(fault), out_dir}, cfg, std::cout);
    } else if (eval->parsed()) {
      racewalk::app::EvalArgs a{processed, fault_of(fault), std::nullopt, out, std::nullopt};
      if (!models.empty()) a.models_dir = models;
      if (!out_json.empty()) a.out_json = out_json;
      code = racewalk::app::cmd_eval(a, cfg, std::cout);
    } else if (importance->parsed()) {
      code = racewalk::app::cmd_importance({models, fault_of(fault), out_prefix}, cfg, std::cout);
    } else if (pose_eval->parsed()) {
      racewalk::app::PoseEvalArgs a{pred, gt, std::nullopt};
      if (!constants.empty()) a.constants = constants;
      code = racewalk::app::cmd_pose_eval(a, std::cout);
    } else if (synth->parsed()) {
      synth_args.out_dir = synth_out;
      code = racewalk::app::cmd_synth(synth_args, std::cout);
    }
    return static_cast<int>(code);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kFatal);
  }
}
