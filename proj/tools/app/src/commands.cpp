#include "racewalk/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "racewalk/error.hpp"
#include "racewalk/pose_metrics.hpp"
#include "racewalk/synth.hpp"

namespace racewalk::app {
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

// Sidecar carrying the effective configuration of the run that wrote `artifact`.
void write_meta(const fs::path& artifact, std::string_view command, const RunConfig& config) {
  nlohmann::ordered_json doc;
  doc["command"] = std::string(command);
  doc["artifact"] = artifact.filename().string();
  doc["run_config"] = nlohmann::ordered_json::parse(config.to_json());
  auto out = open_out(fs::path(artifact.string() + ".meta.json"));
  out << doc.dump(1) << '\n';
}

std::vector<ProcessedCycle> read_processed(const fs::path& path) {
  auto in = open_in(path);
  return read_processed_csv(in);
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

}  // namespace

void RunConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error("invalid config: " + what); };
  if (!(outlier_sd_mult > 0.0)) fail("outlier-sd-mult must be positive");
  if (!(min_prominence_deg > 0.0)) fail("min-prominence-deg must be positive");
  if (min_separation_frames == 0) fail("min-separation-frames must be positive");
  if (!(lambda > 0.0)) fail("lambda must be positive");
  if (!(tol > 0.0)) fail("tol must be positive");
  if (max_iter <= 0) fail("max-iter must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0,1)");
  if (jobs == 0) fail("jobs must be positive");
}

CycleDetectionOptions RunConfig::cycle_options() const {
  return {min_prominence_deg, min_separation_frames};
}

CvOptions RunConfig::cv_options() const {
  CvOptions o;
  o.train = {lambda, tol, max_iter};
  o.task.include_other_fault_as_negative = include_other_fault_as_negative;
  o.threshold = threshold;
  o.jobs = jobs;
  return o;
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json doc;
  doc["outlier_sd_mult"] = outlier_sd_mult;
  doc["min_prominence_deg"] = min_prominence_deg;
  doc["min_separation_frames"] = min_separation_frames;
  doc["lambda"] = lambda;
  doc["tol"] = tol;
  doc["max_iter"] = max_iter;
  doc["threshold"] = threshold;
  doc["include_other_fault_as_negative"] = include_other_fault_as_negative;
  return doc.dump();
}

std::map<std::string, std::string> parse_flat_config(std::istream& in) {
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config: expected key = value at line " + std::to_string(line_no));
    }
    auto key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace {

template <typename T>
void parse_into(std::string_view key, std::string_view text, T& field) {
  std::istringstream ss{std::string(text)};
  T v{};
  ss >> v;
  if (!ss || !(ss >> std::ws).eof()) {
    throw Error("config: bad value for '" + std::string(key) + "': " + std::string(text));
  }
  field = v;
}

}  // namespace

void set_config_field(RunConfig& c, std::string_view key, std::string_view value) {
  if (key == "outlier-sd-mult") return parse_into(key, value, c.outlier_sd_mult);
  if (key == "min-prominence-deg") return parse_into(key, value, c.min_prominence_deg);
  if (key == "min-separation-frames") return parse_into(key, value, c.min_separation_frames);
  if (key == "lambda") return parse_into(key, value, c.lambda);
  if (key == "tol") return parse_into(key, value, c.tol);
  if (key == "max-iter") return parse_into(key, value, c.max_iter);
  if (key == "threshold") return parse_into(key, value, c.threshold);
  if (key == "jobs") return parse_into(key, value, c.jobs);
  if (key == "include-other-fault-as-negative") {
    if (value == "true" || value == "1" || value == "yes") {
      c.include_other_fault_as_negative = true;
    } else if (value == "false" || value == "0" || value == "no") {
      c.include_other_fault_as_negative = false;
    } else {
      throw Error("config: bad value for '" + std::string(key) + "': " + std::string(value));
    }
    return;
  }
  throw Error("config: unknown key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
  return {"outlier-sd-mult", "min-prominence-deg", "min-separation-frames", "lambda", "tol",
          "max-iter", "threshold", "jobs", "include-other-fault-as-negative"};
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::kKept: return "kept";
    case Disposition::kRemovedOutlier: return "removed";
    case Disposition::kFailed: return "failed";
    case Disposition::kUnresolved: return "unresolved";
    case Disposition::kUnlabeled: return "unlabeled";
  }
  return "?";
}

ProcessResult process_dataset(const AssembledDataset& assembled, const RunConfig& config) {
  const auto& ds = assembled.dataset;
  std::vector<const PoseSequence*> order;
  for (const auto& s : ds.sequences) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->video_id < b->video_id; });

  ProcessResult result;
  std::map<std::string, NormalizedSequence> normalized;
  std::map<std::string, KneeAngleSeries> right_knee;
  std::map<std::string, VideoDisposition> disp;

  for (const auto* s : order) {
    VideoDisposition d{s->video_id, s->walker_id, std::string(to_string(ds.label_of(s->video_id))),
                       Disposition::kKept, {}};
    try {
      auto n = normalize_sequence(*s);
      right_knee.emplace(s->video_id, n.right_knee);
      normalized.emplace(s->video_id, std::move(n));
    } catch (const Error& e) {
      d.status = Disposition::kFailed;
      d.reason = e.what();
    }
    disp.emplace(s->video_id, std::move(d));
  }

  if (!right_knee.empty()) {
    result.screen = reject_outliers(right_knee, config.outlier_sd_mult);
    for (const auto& id : result.screen.removed) {
      disp[id].status = Disposition::kRemovedOutlier;
      disp[id].reason = "right knee angle change above " + num(config.outlier_sd_mult) +
                        " x pooled SD (" + num(result.screen.pooled_sigma) + " deg)";
    }
  } else {
    result.screen.multiplier = config.outlier_sd_mult;
  }

  for (const auto* s : order) {
    auto& d = disp[s->video_id];
    if (d.status != Disposition::kKept) continue;
    const auto& n = normalized.at(s->video_id);
    try {
      const auto window = detect_cycle(n.right_knee.theta, config.cycle_options());
      result.cycles.push_back(make_processed_cycle(s->video_id, s->walker_id,
                                                   ds.label_of(s->video_id),
                                                   build_channel_matrix(n, window)));
    } catch (const Error& e) {
      d.status = Disposition::kFailed;
      d.reason = e.what();
    }
  }

  for (const auto& id : assembled.excluded_unresolved) {
    disp[id] = {id, {}, {}, Disposition::kUnresolved, "referees split three ways"};
  }
  for (const auto& id : assembled.excluded_unlabeled) {
    disp[id] = {id, {}, {}, Disposition::kUnlabeled, "no label record"};
  }
  for (auto& [id, d] : disp) result.dispositions.push_back(std::move(d));
  return result;
}

ExitCode cmd_process(const ProcessArgs& args, const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto files = expand_inputs(args.inputs);
  if (files.empty()) throw Error("process: no keypoint files given");

  std::vector<PoseSequence> sequences;
  std::vector<VideoDisposition> load_failures;
  for (const auto& f : files) {
    try {
      sequences.push_back(load_keypoint_file(f.string()));
    } catch (const Error& e) {
      load_failures.push_back({f.stem().string(), {}, {}, Disposition::kFailed, e.what()});
    }
  }

  auto labels = load_labels_csv(args.labels.string());
  std::set<std::string> loaded;
  for (const auto& s : sequences) loaded.insert(s.video_id);
  std::erase_if(labels, [&](const LabelRecord& r) {
    const bool failed = std::any_of(load_failures.begin(), load_failures.end(),
                                    [&](const auto& d) { return d.video_id == r.video_id; });
    return failed && !loaded.contains(r.video_id);
  });

  auto result = process_dataset(assemble_dataset(std::move(sequences), std::move(labels)), config);
  result.dispositions.insert(result.dispositions.end(), load_failures.begin(), load_failures.end());
  std::sort(result.dispositions.begin(), result.dispositions.end(),
            [](const auto& a, const auto& b) { return a.video_id < b.video_id; });

  {
    auto out = open_out(args.out);
    write_processed_csv(out, result.cycles);
  }
  write_meta(args.out, "process", config);

  const fs::path report_path = args.report ? *args.report : fs::path(args.out.string() + ".report.csv");
  {
    auto out = open_out(report_path);
    out << "video_id,walker_id,label,disposition,reason\n";
    for (const auto& d : result.dispositions) {
      std::string reason = d.reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      out << d.video_id << ',' << d.walker_id << ',' << d.label << ',' << to_string(d.status) << ','
          << reason << '\n';
    }
  }
  write_meta(report_path, "process", config);

  // Valid data / videos per walker and class.
  std::map<std::string, std::map<std::string, std::pair<int, int>>> table;
  std::size_t failed = 0;
  for (const auto& d : result.dispositions) {
    if (d.status == Disposition::kFailed) ++failed;
    if (d.walker_id.empty()) continue;
    auto& cell = table[d.walker_id][d.label];
    ++cell.second;
    if (d.status == Disposition::kKept) ++cell.first;
  }
  log << "pooled right-knee SD " << fixed3(result.screen.pooled_sigma) << " deg, removed "
      << result.screen.removed.size() << " outlier video(s), " << failed << " failed\n";
  log << "walker  normal      bk          lc          (valid / videos)\n";
  for (const auto& [walker, row] : table) {
    log << walker;
    for (const char* label : {"normal", "bk", "lc"}) {
      const auto it = row.find(label);
      const auto cell = it == row.end() ? std::pair{0, 0} : it->second;
      char buf[32];
      std::snprintf(buf, sizeof buf, "  %4d / %-4d", cell.first, cell.second);
      log << buf;
    }
    log << '\n';
  }
  log << "wrote " << result.cycles.size() << " processed cycles to " << args.out.string() << '\n';

  if (result.cycles.empty()) return ExitCode::kFatal;
  return failed > 0 ? ExitCode::kPartial : ExitCode::kSuccess;
}

ExitCode cmd_train(const TrainArgs& args, const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto samples = read_processed(args.processed);
  const auto options = config.cv_options();
  const auto folds = make_lowo_folds(samples, args.fault, options.task);
  fs::create_directories(args.out_dir);
  for (const auto& fold : folds) {
    const auto manifest = make_manifest(samples, fold, args.fault, options.task);
    const auto model = train_fold(samples, manifest, args.fault, options.train, options.task);
    const auto path = args.out_dir / (std::string(to_string(args.fault)) + "_" + fold.fold_id + ".json");
    auto out = open_out(path);
    write_model_json(out, model, config.to_json());
    log << "fold " << fold.fold_id << ": " << manifest.train_video_ids.size() << " training samples, "
        << (model.converged ? "converged" : "NOT converged") << " after " << model.iterations
        << " iterations -> " << path.string() << '\n';
  }
  return ExitCode::kSuccess;
}

std::vector<LogisticModel> load_fold_models(const fs::path& dir, FaultType fault) {
  if (!fs::is_directory(dir)) throw Error("models directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        e.path().filename().string().find(".meta.") == std::string::npos) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<LogisticModel> models;
  for (const auto& f : files) {
    auto in = open_in(f);
    auto m = read_model_json(in);
    if (m.fault_type == fault && m.training_fold_id.starts_with("lowo-")) models.push_back(std::move(m));
  }
  if (models.empty()) {
    throw Error("no " + std::string(to_string(fault)) + " fold models in '" + dir.string() + "'");
  }
  std::sort(models.begin(), models.end(),
            [](const auto& a, const auto& b) { return a.training_fold_id < b.training_fold_id; });
  return models;
}

ExitCode cmd_eval(const EvalArgs& args, const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto samples = read_processed(args.processed);
  const auto options = config.cv_options();

  std::vector<MetricsRow> rows;
  std::vector<FoldManifest> manifests;
  if (args.models_dir) {
    const auto models = load_fold_models(*args.models_dir, args.fault);
    const auto folds = make_lowo_folds(samples, args.fault, options.task);
    for (const auto& model : models) {
      const auto walker = test_walker_of_fold(model.training_fold_id);
      const auto fold = std::find_if(folds.begin(), folds.end(),
                                     [&](const auto& f) { return f.test_walker_id == walker; });
      if (fold == folds.end()) throw Error("model fold '" + model.training_fold_id + "' has no test data");
      auto manifest = make_manifest(samples, *fold, args.fault, options.task);
      if (model.train_video_ids != manifest.train_video_ids) {
        throw Error("fold manifest mismatch for '" + model.training_fold_id +
                    "': model was trained on different samples");
      }
      rows.push_back(evaluate_fold(model, samples, manifest, args.fault, options.threshold, options.task));
      manifests.push_back(std::move(manifest));
    }
  } else {
    auto cv = run_cv(samples, args.fault, options);
    rows = std::move(cv.rows);
    manifests = std::move(cv.manifests);
  }

  {
    auto out = open_out(args.out_csv);
    write_metrics_csv(out, rows);
  }
  write_meta(args.out_csv, "eval", config);
  if (args.out_json) {
    auto out = open_out(*args.out_json);
    write_metrics_json(out, rows, manifests, config.to_json());
  }

  const auto opt = [](const std::optional<double>& v) { return v ? fixed3(*v) : std::string("  -  "); };
  log << "walker  fault  accuracy  f-score  (n)\n";
  for (const auto& r : rows) {
    log << r.walker_id << "       " << to_string(r.fault) << "     " << fixed3(r.accuracy) << "     "
        << opt(r.f_score) << "    (" << r.counts.total() << ")\n";
  }
  return ExitCode::kSuccess;
}

ExitCode cmd_importance(const ImportanceArgs& args, const RunConfig& config, std::ostream& log) {
  const auto models = load_fold_models(args.models_dir, args.fault);
  const auto report = feature_importance(models);

  const fs::path categories(args.out_prefix.string() + "_categories.csv");
  {
    auto out = open_out(categories);
    out << "category,importance\n";
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      out << to_string(static_cast<FeatureCategory>(c)) << ',' << num(report.category_importance[c]) << '\n';
    }
  }
  write_meta(categories, "importance", config);

  const fs::path frames(args.out_prefix.string() + "_frames.csv");
  {
    auto out = open_out(frames);
    out << "channel,channel_name,category,bin,first_frame,last_frame,importance\n";
    for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
      for (std::size_t b = 0; b < ImportanceReport::kNumBins; ++b) {
        out << ch << ',' << channel_name(ch) << ',' << to_string(category_of_channel(ch)) << ',' << b
            << ',' << b * ImportanceReport::kBinWidth << ','
            << (b + 1) * ImportanceReport::kBinWidth - 1 << ',' << num(report.frame_importance[ch][b])
            << '\n';
      }
    }
  }
  write_meta(frames, "importance", config);

  std::vector<std::size_t> rank(kNumCategories);
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::stable_sort(rank.begin(), rank.end(), [&](auto a, auto b) {
    return report.category_importance[a] > report.category_importance[b];
  });
  log << to_string(args.fault) << " importance averaged over " << report.n_models_averaged << " models\n";
  for (const auto c : rank) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "  %-11s %.6f\n",
                  std::string(to_string(static_cast<FeatureCategory>(c))).c_str(),
                  report.category_importance[c]);
    log << buf;
  }
  return ExitCode::kSuccess;
}

ExitCode cmd_pose_eval(const PoseEvalArgs& args, std::ostream& log) {
  const auto pred = load_keypoint_file(args.predictions.string());
  auto gt_in = open_in(args.ground_truth);
  const auto gts = load_ground_truth(gt_in);
  KeypointConstants k = KeypointConstants::coco();
  if (args.constants) {
    auto in = open_in(*args.constants);
    k = load_keypoint_constants(in);
  }
  if (pred.frames.size() != gts.size()) {
    throw Error("pose-eval: prediction has " + std::to_string(pred.frames.size()) +
                " frames, ground truth " + std::to_string(gts.size()));
  }
  double oks_sum = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) oks_sum += oks(pred.frames[i], gts[i], k);
  char buf[160];
  std::snprintf(buf, sizeof buf, "frames %zu\nmean OKS %.6f\nAP@0.50 %.6f\nAP@0.75 %.6f\nmAP %.6f\n",
                gts.size(), oks_sum / static_cast<double>(gts.size()),
                keypoint_ap(pred.frames, gts, k, 0.50), keypoint_ap(pred.frames, gts, k, 0.75),
                mean_ap(pred.frames, gts, k));
  log << buf;
  return ExitCode::kSuccess;
}

ExitCode cmd_synth(const SynthArgs& args, std::ostream& log) {
  SynthDatasetSpec spec;
  spec.n_walkers = args.walkers;
  spec.samples_per_class = args.samples_per_class;
  spec.seed = args.seed;
  spec.bk_severity_deg = args.bk_severity;
  spec.lc_lift = args.lc_lift;
  spec.base.noise_sigma = args.noise;
  spec.base.n_frames = args.n_frames;
  spec.base.cycle_frames = args.cycle_frames;
  const auto data = generate_dataset(spec);
  write_dataset(data, args.out_dir);
  log << "wrote " << data.samples.size() << " keypoint files and labels.csv to "
      << args.out_dir.string() << '\n';
  return ExitCode::kSuccess;
}

}  // namespace racewalk::app
