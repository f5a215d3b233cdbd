#include "racewalk/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"
#include "racewalk/error.hpp"

namespace racewalk {
namespace {

constexpr std::string_view kFoldPrefix = "lowo-";

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, const ProcessedCycle*> index_by_video(std::span<const ProcessedCycle> samples) {
  std::map<std::string, const ProcessedCycle*> out;
  for (const auto& s : samples) {
    if (!out.emplace(s.video_id, &s).second) {
      throw Error("duplicate video_id '" + s.video_id + "' in processed samples");
    }
  }
  return out;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::optional<int> task_target(FaultLabel label, FaultType fault, const TaskOptions& options) {
  if (label == positive_label(fault)) return 1;
  if (label == FaultLabel::kNormal) return 0;
  if (options.include_other_fault_as_negative) return 0;
  return std::nullopt;
}

std::string fold_id_for(std::string_view test_walker) {
  return std::string(kFoldPrefix) + std::string(test_walker);
}

std::string test_walker_of_fold(std::string_view fold_id) {
  if (!fold_id.starts_with(kFoldPrefix)) {
    throw Error("fold id '" + std::string(fold_id) + "' is not a leave-one-walker-out fold");
  }
  return std::string(fold_id.substr(kFoldPrefix.size()));
}

std::vector<FoldSpec> make_lowo_folds(std::span<const ProcessedCycle> samples, FaultType fault,
                                      const TaskOptions&) {
  std::set<std::string> eligible;
  for (const auto& s : samples) {
    if (s.label == positive_label(fault)) eligible.insert(s.walker_id);
  }
  if (eligible.size() < 2) {
    throw Error("fewer than 2 walkers have " + std::string(to_string(fault)) + " samples");
  }
  std::vector<FoldSpec> folds;
  for (const auto& test : eligible) {
    FoldSpec f{fold_id_for(test), test, {}};
    for (const auto& w : eligible) {
      if (w != test) f.train_walker_ids.push_back(w);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

void ConfusionMatrix::add(bool predicted_positive, bool actual_positive) {
  if (predicted_positive) {
    ++(actual_positive ? tp : fp);
  } else {
    ++(actual_positive ? fn : tn);
  }
}

MetricsRow compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("compute_metrics: empty confusion matrix");
  MetricsRow row;
  row.counts = cm;
  const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  row.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  row.precision = ratio(cm.tp, cm.tp + cm.fp);
  row.recall = ratio(cm.tp, cm.tp + cm.fn);
  if (row.precision && row.recall && *row.precision + *row.recall > 0.0) {
    row.f_score = 2.0 * *row.precision * *row.recall / (*row.precision + *row.recall);
  }
  return row;
}

FoldManifest make_manifest(std::span<const ProcessedCycle> samples, const FoldSpec& fold,
                           FaultType fault, const TaskOptions& options) {
  FoldManifest m{fold, {}, {}};
  const std::set<std::string> train_walkers(fold.train_walker_ids.begin(),
                                            fold.train_walker_ids.end());
  for (const auto& s : samples) {
    if (!task_target(s.label, fault, options)) continue;
    if (s.walker_id == fold.test_walker_id) {
      m.test_video_ids.push_back(s.video_id);
    } else if (train_walkers.contains(s.walker_id)) {
      m.train_video_ids.push_back(s.video_id);
    }
  }
  std::sort(m.train_video_ids.begin(), m.train_video_ids.end());
  std::sort(m.test_video_ids.begin(), m.test_video_ids.end());
  return m;
}

LogisticModel train_fold(std::span<const ProcessedCycle> samples, const FoldManifest& manifest,
                         FaultType fault, const TrainOptions& train_options,
                         const TaskOptions& task) {
  const auto by_id = index_by_video(samples);
  FeatureMatrix x;
  std::vector<int> y;
  for (const auto& id : manifest.train_video_ids) {
    const auto* s = by_id.at(id);
    x.append_row(s->features.values);
    y.push_back(*task_target(s->label, fault, task));
  }
  auto model = train(x, y, train_options, fault, manifest.spec.fold_id);
  model.train_video_ids = manifest.train_video_ids;
  return model;
}

MetricsRow evaluate_fold(const LogisticModel& model, std::span<const ProcessedCycle> samples,
                         const FoldManifest& manifest, FaultType fault, double threshold,
                         const TaskOptions& task) {
  const auto by_id = index_by_video(samples);
  ConfusionMatrix cm;
  for (const auto& id : manifest.test_video_ids) {
    const auto* s = by_id.at(id);
    cm.add(predict(model, s->features, threshold), *task_target(s->label, fault, task) == 1);
  }
  auto row = compute_metrics(cm);
  row.walker_id = manifest.spec.test_walker_id;
  row.fault = fault;
  return row;
}

CvResult run_cv(std::span<const ProcessedCycle> samples, FaultType fault, const CvOptions& options) {
  const auto folds = make_lowo_folds(samples, fault, options.task);
  CvResult result;
  result.fault = fault;
  for (const auto& f : folds) result.manifests.push_back(make_manifest(samples, f, fault, options.task));

  result.models.resize(folds.size());
  result.rows.resize(folds.size());
  const auto run_fold = [&](std::size_t i) {
    result.models[i] = train_fold(samples, result.manifests[i], fault, options.train, options.task);
    result.rows[i] = evaluate_fold(result.models[i], samples, result.manifests[i], fault,
                                   options.threshold, options.task);
  };

  // Each fold writes only its own slot, so the output is independent of jobs.
  const std::size_t jobs = std::max(1u, options.jobs);
  for (std::size_t begin = 0; begin < folds.size(); begin += jobs) {
    std::vector<std::future<void>> pending;
    const std::size_t end = std::min(folds.size(), begin + jobs);
    for (std::size_t i = begin + 1; i < end; ++i) {
      pending.push_back(std::async(std::launch::async, run_fold, i));
    }
    run_fold(begin);
    for (auto& p : pending) p.get();
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "walker_id,fault,accuracy,precision,recall,f_score\n";
  const auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    out << r.walker_id << ',' << to_string(r.fault) << ',' << format_number(r.accuracy) << ','
        << cell(r.precision) << ',' << cell(r.recall) << ',' << cell(r.f_score) << '\n';
  }
}

void write_metrics_json(std::ostream& out, std::span<const MetricsRow> rows,
                        std::span<const FoldManifest> manifests, std::string_view run_config_json) {
  nlohmann::ordered_json doc;
  auto& jrows = doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"walker_id", r.walker_id},
                     {"fault", std::string(to_string(r.fault))},
                     {"accuracy", r.accuracy},
                     {"precision", optional_json(r.precision)},
                     {"recall", optional_json(r.recall)},
                     {"f_score", optional_json(r.f_score)},
                     {"tp", r.counts.tp},
                     {"fp", r.counts.fp},
                     {"fn", r.counts.fn},
                     {"tn", r.counts.tn}});
  }
  auto& jfolds = doc["folds"] = nlohmann::ordered_json::array();
  for (const auto& m : manifests) {
    jfolds.push_back({{"fold_id", m.spec.fold_id},
                      {"test_walker_id", m.spec.test_walker_id},
                      {"train_walker_ids", m.spec.train_walker_ids},
                      {"train_video_ids", m.train_video_ids},
                      {"test_video_ids", m.test_video_ids}});
  }
  if (!run_config_json.empty()) doc["run_config"] = nlohmann::ordered_json::parse(run_config_json);
  out << doc.dump(1) << '\n';
}

}  // namespace racewalk
