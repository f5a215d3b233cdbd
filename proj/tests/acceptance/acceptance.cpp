// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.
//
// usage: racewalk_acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "racewalk/app/commands.hpp"
#include "racewalk/classifier.hpp"
#include "racewalk/error.hpp"
#include "racewalk/evaluation.hpp"
#include "racewalk/gait_cycle.hpp"
#include "racewalk/pose_metrics.hpp"
#include "racewalk/preprocess.hpp"

namespace fs = std::filesystem;
using namespace racewalk;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS  " : "FAIL  ") << name << "  (" << detail << ")" << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Pose random_pose(std::mt19937_64& rng) {
  Pose p;
  for (auto& kp : p.keypoints) kp = {uniform(rng, 0.0, 640.0), uniform(rng, 0.0, 480.0), 1.0};
  return p;
}

// Full synthetic pipeline into `dir`: synth -> process -> train -> eval -> importance.
struct PipelineRun {
  fs::path dir;
  double seconds = 0.0;
  bool ok = true;
  std::string error;
};

PipelineRun run_pipeline(const fs::path& dir) {
  PipelineRun run{dir};
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ostringstream log;
    app::SynthArgs s;
    s.out_dir = dir / "data";
    s.walkers = 4;
    s.samples_per_class = 15;
    s.seed = 1;
    s.bk_severity = 15.0;
    s.lc_lift = 0.1;
    s.noise = 1.5;
    const app::RunConfig cfg;
    if (app::cmd_synth(s, log) != app::ExitCode::kSuccess) throw Error("synth failed");
    const auto process_code =
        app::cmd_process({{dir / "data" / "keypoints"}, dir / "data" / "labels.csv",
                          dir / "cycles.csv", std::nullopt},
                         cfg, log);
    if (process_code == app::ExitCode::kFatal) throw Error("process failed");
    for (auto fault : {FaultType::kBentKnee, FaultType::kLossOfContact}) {
      const std::string tag(to_string(fault));
      if (app::cmd_train({dir / "cycles.csv", fault, dir / "models"}, cfg, log) != app::ExitCode::kSuccess) {
        throw Error("train failed");
      }
      if (app::cmd_eval({dir / "cycles.csv", fault, dir / "models", dir / (tag + "_metrics.csv"),
                         dir / (tag + "_metrics.json")},
                        cfg, log) != app::ExitCode::kSuccess) {
        throw Error("eval failed");
      }
      if (app::cmd_importance({dir / "models", fault, dir / (tag + "_importance")}, cfg, log) !=
          app::ExitCode::kSuccess) {
        throw Error("importance failed");
      }
    }
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void end_to_end(const PipelineRun& run) {
  const std::string name = "end-to-end synthetic CV: per-walker accuracy >= 0.95 and F >= 0.95 (BK, LC), < 120 s";
  if (!run.ok) return report(false, name, run.error);
  double min_acc = 1.0, min_f = 1.0;
  std::size_t rows = 0;
  bool complete = true;
  for (const char* tag : {"BK", "LC"}) {
    for (const auto& r : read_csv(run.dir / (std::string(tag) + "_metrics.csv"))) {
      ++rows;
      if (r.size() < 6 || r[5].empty()) {
        complete = false;
        continue;
      }
      min_acc = std::min(min_acc, std::stod(r[2]));
      min_f = std::min(min_f, std::stod(r[5]));
    }
  }
  const bool ok = complete && rows == 8 && min_acc >= 0.95 && min_f >= 0.95 && run.seconds < 120.0;
  report(ok, name,
         std::to_string(rows) + " rows, min accuracy " + fmt("%.3f", min_acc) + ", min F " +
             fmt("%.3f", min_f) + ", " + fmt("%.1f", run.seconds) + " s");
}

std::string top_category(const fs::path& csv) {
  std::string best;
  double best_v = -1.0;
  for (const auto& r : read_csv(csv)) {
    const double v = std::stod(r.at(1));
    if (v > best_v) {
      best_v = v;
      best = r.at(0);
    }
  }
  return best;
}

void importance(const PipelineRun& run) {
  const std::string name = "importance: BK top category knee-angle, LC top category a y-coordinate";
  if (!run.ok) return report(false, name, run.error);
  const auto bk = top_category(run.dir / "BK_importance_categories.csv");
  const auto lc = top_category(run.dir / "LC_importance_categories.csv");
  const bool ok = bk == "knee-angle" && lc.size() > 2 && lc.ends_with("-y");
  report(ok, name, "BK top " + bk + ", LC top " + lc);
}

void gradient_oracle() {
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 50, p = 1 + rng() % 40;
    FeatureMatrix x(n, p);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      for (std::size_t j = 0; j < p; ++j) x(i, j) = g(rng);
    }
    std::vector<double> params(p + 1);
    for (auto& v : params) v = 0.5 * g(rng);
    const double lambda = uniform(rng, 0.0, 2.0);
    const auto lg = loss_and_gradient(params, x, y, lambda);
    const auto fd = oracle::central_difference(
        [&](std::span<const double> q) { return loss_and_gradient(q, x, y, lambda).loss; }, params, 1e-5);
    worst = std::max(worst, oracle::relative_error(lg.gradient, fd));
  }
  report(worst <= 1e-5, "gradient oracle: 20 random instances vs central differences, rel. error <= 1e-5",
         "max " + fmt("%.2e", worst));
}

void training_oracle() {
  double worst = 0.0;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  bool all_converged = true;
  for (int trial = 0; trial < 11; ++trial) {
    std::vector<double> raw;
    std::vector<int> y;
    double lambda = 0.1;
    if (trial == 0) {
      raw = {-1.0, 1.0};
      y = {0, 1};
    } else {
      const std::size_t n = 4 + rng() % 27;
      for (std::size_t i = 0; i < n; ++i) {
        raw.push_back(2.0 * g(rng) - 5.0);
        y.push_back(uniform(rng, 0, 1) < 1.0 / (1.0 + std::exp(-(raw.back() + 5.0))) ? 1 : 0);
      }
      y[0] = 0;
      y[1] = 1;
      lambda = uniform(rng, 0.1, 2.0);
    }
    FeatureMatrix x(raw.size(), 1);
    for (std::size_t i = 0; i < raw.size(); ++i) x(i, 0) = raw[i];
    // The default stopping rule bounds the gradient, not the parameter error;
    // a tighter tol isolates the optimizer from its stopping point.
    const auto model = train(x, y, {.lambda = lambda, .tol = 1e-10}, FaultType::kBentKnee);
    all_converged = all_converged && model.converged;
    const oracle::OneFeatureLogistic f{oracle::zscore(raw), y, lambda};
    const auto best = oracle::grid_refine(std::cref(f));
    worst = std::max({worst, std::abs(model.weights[0] - best.w), std::abs(model.bias - best.b)});
  }
  report(all_converged && worst <= 1e-6,
         "training oracle: 2-parameter optimum vs grid-refinement minimizer within 1e-6",
         "11 problems, max deviation " + fmt("%.2e", worst));
}

void geometry() {
  std::mt19937_64 rng(31);
  double worst_norm = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose p = random_pose(rng);
    const double c = uniform(rng, 0.1, 10.0), tx = uniform(rng, -1000, 1000), ty = uniform(rng, -1000, 1000);
    Pose q = p;
    for (auto& kp : q.keypoints) {
      kp.x = c * kp.x + tx;
      kp.y = c * kp.y + ty;
    }
    for (auto dir : {WalkDirection::kPositive, WalkDirection::kNegative}) {
      const auto a = normalize_pose(p, dir), b = normalize_pose(q, dir);
      for (std::size_t i = 0; i < kNumNormalizedPoints; ++i) {
        worst_norm = std::max({worst_norm, std::abs(a.points[i].x - b.points[i].x),
                               std::abs(a.points[i].y - b.points[i].y)});
      }
    }
  }
  const double fixture_err = std::max({std::abs(knee_angle({0, 1}, {0, 0}, {0, -1}) - 180.0),
                                       std::abs(knee_angle({0, 1}, {0, 0}, {-1, 0}) - 90.0),
                                       std::abs(knee_angle({0, 1}, {0, 0}, {1, 0}) - 270.0)});
  double worst_rot = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Point2 pts[3];
    for (auto& pt : pts) pt = {uniform(rng, -2, 2), uniform(rng, -2, 2)};
    const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const auto rot = [&](Point2 v) {
      return Point2{std::cos(a) * v.x - std::sin(a) * v.y, std::sin(a) * v.x + std::cos(a) * v.y};
    };
    const double d = std::abs(knee_angle(pts[0], pts[1], pts[2]) -
                              knee_angle(rot(pts[0]), rot(pts[1]), rot(pts[2])));
    worst_rot = std::max(worst_rot, std::min(d, 360.0 - d));
  }
  report(worst_norm <= 1e-9 && fixture_err <= 1e-9 && worst_rot <= 1e-9,
         "geometry: normalization invariance, knee-angle 180/90/270 fixtures, rotation invariance (1e-9)",
         "invariance " + fmt("%.1e", worst_norm) + ", fixtures " + fmt("%.1e", fixture_err) +
             ", rotation " + fmt("%.1e", worst_rot));
}

void resampling() {
  std::mt19937_64 rng(41);
  std::vector<double> s(kCycleSamples);
  for (auto& v : s) v = uniform(rng, -100, 100);
  const bool identity = resample(s) == s;
  double worst = 0.0;
  bool endpoints = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 2 + rng() % 300;
    const double a = uniform(rng, -10, 10), b = uniform(rng, -100, 100);
    std::vector<double> w(len);
    for (std::size_t i = 0; i < len; ++i) w[i] = a * static_cast<double>(i) + b;
    const auto r = resample(w);
    endpoints = endpoints && r.front() == w.front() && r.back() == w.back();
    const double step = static_cast<double>(len - 1) / static_cast<double>(kCycleSamples - 1);
    for (std::size_t j = 0; j < r.size(); ++j) {
      worst = std::max(worst, std::abs(r[j] - (a * step * static_cast<double>(j) + b)));
    }
  }
  report(identity && endpoints && worst <= 1e-9,
         "resampling: identity at 85, affine exactness <= 1e-9, endpoints preserved",
         std::string("identity ") + (identity ? "yes" : "no") + ", endpoints " +
             (endpoints ? "yes" : "no") + ", affine error " + fmt("%.1e", worst));
}

void oks_ap() {
  const auto k = KeypointConstants::coco();
  std::mt19937_64 rng(51);
  const Pose base = random_pose(rng);
  GroundTruthPose gt;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) gt.keypoints[i] = base.keypoints[i].position();
  gt.scale = 2.0;
  const std::size_t knee = index_of(KeypointName::kLeftKnee);
  gt.visibility[knee] = 1;
  Pose pred = base;
  pred.keypoints[knee].x += std::sqrt(2.0) * gt.scale * k.k[knee];
  const double exp_err = std::abs(oks(pred, gt, k) - std::exp(-1.0));

  // Counting fixtures: terms {0.9, 0.9, 0.6, 0.4} at 0.5, and all terms 0.52 for mAP.
  gt.scale = 100.0;
  gt.visibility.fill(0);
  Pose four = base;
  const double terms[] = {0.9, 0.9, 0.6, 0.4};
  for (std::size_t i = 0; i < 4; ++i) {
    gt.visibility[i] = 2;
    four.keypoints[i].x = gt.keypoints[i].x + gt.scale * k.k[i] * std::sqrt(-2.0 * std::log(terms[i]));
  }
  const double ap = keypoint_ap(std::vector<Pose>{four}, std::vector<GroundTruthPose>{gt}, k, 0.5);
  gt.visibility.fill(2);
  Pose flat = base;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    flat.keypoints[i].x = gt.keypoints[i].x + gt.scale * k.k[i] * std::sqrt(-2.0 * std::log(0.52));
  }
  const double map = mean_ap(std::vector<Pose>{flat}, std::vector<GroundTruthPose>{gt}, k);
  const bool counts = ap == 0.75 && std::abs(map - 0.1) <= 1e-12;

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose truth = random_pose(rng);
    Pose p = truth;
    for (auto& kp : p.keypoints) {
      kp.x += uniform(rng, -30, 30);
      kp.y += uniform(rng, -30, 30);
    }
    GroundTruthPose g;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      g.keypoints[i] = truth.keypoints[i].position();
      g.visibility[i] = static_cast<int>(rng() % 3);
    }
    g.visibility[0] = 2;
    g.scale = uniform(rng, 20, 300);
    const double v = oks(p, g, k);
    const double tx = uniform(rng, -500, 500), ty = uniform(rng, -500, 500), c = uniform(rng, 0.1, 10);
    Pose pt = p, ps = p;
    GroundTruthPose gt_t = g, gt_s = g;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      pt.keypoints[i].x += tx;
      pt.keypoints[i].y += ty;
      gt_t.keypoints[i] = gt_t.keypoints[i] + Point2{tx, ty};
      ps.keypoints[i].x *= c;
      ps.keypoints[i].y *= c;
      gt_s.keypoints[i] = c * gt_s.keypoints[i];
    }
    gt_s.scale *= c;
    worst = std::max({worst, std::abs(oks(pt, gt_t, k) - v), std::abs(oks(ps, gt_s, k) - v)});
  }
  report(exp_err <= 1e-12 && counts && worst <= 1e-12,
         "OKS/AP: exp(-1) fixture (1e-12), AP/mAP counting fixtures, translation and scaling invariance",
         "exp(-1) error " + fmt("%.1e", exp_err) + ", AP " + fmt("%.4f", ap) + ", mAP " +
             fmt("%.4f", map) + ", invariance " + fmt("%.1e", worst));
}

void metrics_oracle() {
  std::mt19937_64 rng(61);
  double worst = 0.0;
  bool presence = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<bool> pred(n), actual(n);
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng() % 2;
      actual[i] = rng() % 2;
      cm.add(pred[i], actual[i]);
    }
    long tp, fp, fn, tn;
    const auto o = oracle::recount(pred, actual, tp, fp, fn, tn);
    const auto r = compute_metrics(cm);
    presence = presence && r.precision.has_value() == o.precision.has_value() &&
               r.recall.has_value() == o.recall.has_value() && r.f_score.has_value() == o.f_score.has_value() &&
               static_cast<long>(cm.tp) == tp && static_cast<long>(cm.fp) == fp &&
               static_cast<long>(cm.fn) == fn && static_cast<long>(cm.tn) == tn;
    worst = std::max(worst, std::abs(r.accuracy - o.accuracy));
    if (o.precision && r.precision) worst = std::max(worst, std::abs(*r.precision - *o.precision));
    if (o.recall && r.recall) worst = std::max(worst, std::abs(*r.recall - *o.recall));
    if (o.f_score && r.f_score) worst = std::max(worst, std::abs(*r.f_score - *o.f_score));
  }
  report(presence && worst <= 1e-12, "metrics oracle: 50 random confusion matrices vs brute-force recount",
         "max deviation " + fmt("%.1e", worst));
}

void no_leakage(const PipelineRun& run) {
  const std::string name = "no leakage: every fold's training and test walker sample sets are disjoint";
  if (!run.ok) return report(false, name, run.error);
  std::ifstream in(run.dir / "cycles.csv");
  const auto samples = read_processed_csv(in);
  std::size_t folds = 0;
  bool ok = true;
  for (auto fault : {FaultType::kBentKnee, FaultType::kLossOfContact}) {
    const auto cv = run_cv(samples, fault);
    for (std::size_t f = 0; f < cv.manifests.size(); ++f) {
      const auto& m = cv.manifests[f];
      ++folds;
      std::set<std::string> train_walkers, test_walkers;
      for (const auto& s : samples) {
        if (std::binary_search(m.train_video_ids.begin(), m.train_video_ids.end(), s.video_id)) {
          train_walkers.insert(s.walker_id);
        }
        if (std::binary_search(m.test_video_ids.begin(), m.test_video_ids.end(), s.video_id)) {
          test_walkers.insert(s.walker_id);
        }
      }
      std::vector<std::string> shared;
      std::set_intersection(m.train_video_ids.begin(), m.train_video_ids.end(), m.test_video_ids.begin(),
                            m.test_video_ids.end(), std::back_inserter(shared));
      ok = ok && shared.empty() && !m.test_video_ids.empty() &&
           test_walkers == std::set<std::string>{m.spec.test_walker_id} &&
           !train_walkers.contains(m.spec.test_walker_id) &&
           cv.models[f].train_video_ids == m.train_video_ids;
    }
  }
  report(ok && folds == 8, name, std::to_string(folds) + " folds audited");
}

void determinism(const PipelineRun& a, const PipelineRun& b) {
  const std::string name = "determinism: repeated pipeline gives byte-identical CSV, model and metrics files";
  if (!a.ok || !b.ok) return report(false, name, a.ok ? b.error : a.error);
  std::vector<fs::path> files{"cycles.csv", "BK_metrics.csv", "BK_metrics.json", "LC_metrics.csv",
                              "LC_metrics.json"};
  for (const auto& e : fs::directory_iterator(a.dir / "models")) files.push_back(fs::path("models") / e.path().filename());
  std::sort(files.begin(), files.end());
  std::size_t same = 0;
  std::string first_diff;
  for (const auto& f : files) {
    if (fs::exists(b.dir / f) && slurp(a.dir / f) == slurp(b.dir / f)) {
      ++same;
    } else if (first_diff.empty()) {
      first_diff = f.string();
    }
  }
  report(same == files.size() && files.size() > 5, name,
         std::to_string(same) + "/" + std::to_string(files.size()) + " files identical" +
             (first_diff.empty() ? "" : ", first difference " + first_diff));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "racewalk_acceptance";
  const auto first = run_pipeline(work / "run1");
  const auto second = run_pipeline(work / "run2");

  end_to_end(first);
  importance(first);
  gradient_oracle();
  training_oracle();
  geometry();
  resampling();
  oks_ap();
  metrics_oracle();
  no_leakage(first);
  determinism(first, second);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
