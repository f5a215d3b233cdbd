#include "racewalk/pose_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>

#include "json.hpp"
#include "racewalk/error.hpp"

namespace racewalk {

std::size_t GroundTruthPose::visible_count() const {
  return static_cast<std::size_t>(
      std::count_if(visibility.begin(), visibility.end(), [](int v) { return v > 0; }));
}

double bbox_scale(const std::array<Point2, kNumKeypoints>& keypoints,
                  const std::array<int, kNumKeypoints>& visibility) {
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (visibility[i] <= 0) continue;
    x0 = std::min(x0, keypoints[i].x);
    x1 = std::max(x1, keypoints[i].x);
    y0 = std::min(y0, keypoints[i].y);
    y1 = std::max(y1, keypoints[i].y);
  }
  if (x0 > x1) throw Error("bbox_scale: no visible keypoints");
  return std::sqrt((x1 - x0) * (y1 - y0));
}

KeypointConstants KeypointConstants::coco() {
  // 2 * sigma_i for nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles.
  return {{0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144, 0.124, 0.124, 0.214,
           0.214, 0.174, 0.174, 0.178, 0.178}};
}

namespace {

void check_gt(const GroundTruthPose& gt) {
  if (!(gt.scale > 0.0) || !std::isfinite(gt.scale)) throw Error("object scale must be positive");
}

double similarity_term(Point2 pred, Point2 gt, double scale, double k) {
  const Point2 d = pred - gt;
  return std::exp(-dot(d, d) / (2.0 * scale * scale * k * k));
}

}  // namespace

double oks(const Pose& pred, const GroundTruthPose& gt, const KeypointConstants& k) {
  check_gt(gt);
  double num = 0.0;
  std::size_t den = 0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (gt.visibility[i] <= 0) continue;
    num += similarity_term(pred.keypoints[i].position(), gt.keypoints[i], gt.scale, k.k[i]);
    ++den;
  }
  if (den == 0) throw Error("oks: no visible keypoints");
  return num / static_cast<double>(den);
}

std::vector<double> keypoint_similarities(std::span<const Pose> preds,
                                          std::span<const GroundTruthPose> gts,
                                          const KeypointConstants& k) {
  if (preds.size() != gts.size()) throw Error("prediction and ground-truth counts differ");
  std::vector<double> terms;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    check_gt(gts[p]);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      if (gts[p].visibility[i] <= 0) continue;
      terms.push_back(similarity_term(preds[p].keypoints[i].position(), gts[p].keypoints[i],
                                      gts[p].scale, k.k[i]));
    }
  }
  if (terms.empty()) throw Error("no visible keypoints in the whole set");
  return terms;
}

namespace {

double fraction_above(std::span<const double> terms, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("AP threshold must lie in (0,1)");
  const auto hits = std::count_if(terms.begin(), terms.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(hits) / static_cast<double>(terms.size());
}

}  // namespace

double keypoint_ap(std::span<const Pose> preds, std::span<const GroundTruthPose> gts,
                   const KeypointConstants& k, double threshold) {
  return fraction_above(keypoint_similarities(preds, gts, k), threshold);
}

std::array<double, 10> ap_thresholds() {
  std::array<double, 10> t{};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(50 + 5 * i) / 100.0;
  return t;
}

double mean_ap(std::span<const Pose> preds, std::span<const GroundTruthPose> gts,
               const KeypointConstants& k) {
  const auto terms = keypoint_similarities(preds, gts, k);
  const auto thresholds = ap_thresholds();
  double sum = 0.0;
  for (const double t : thresholds) sum += fraction_above(terms, t);
  return sum / static_cast<double>(thresholds.size());
}

std::vector<GroundTruthPose> load_ground_truth(std::istream& in) {
  std::vector<GroundTruthPose> out;
  try {
    const auto doc = nlohmann::json::parse(in);
    const auto& frames = doc.at("frames");
    const auto& vis = doc.at("visibility");
    if (!frames.is_array() || !vis.is_array() || vis.size() != frames.size()) {
      throw Error("ground truth: visibility must have one entry per frame");
    }
    const nlohmann::json* scales = doc.contains("scale") ? &doc.at("scale") : nullptr;
    if (scales && (!scales->is_array() || scales->size() != frames.size())) {
      throw Error("ground truth: scale must have one entry per frame");
    }
    for (std::size_t f = 0; f < frames.size(); ++f) {
      if (frames[f].size() != kNumKeypoints || vis[f].size() != kNumKeypoints) {
        throw Error("keypoint count: expected 17 per frame");
      }
      GroundTruthPose gt;
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        gt.keypoints[i] = {frames[f][i].at(0).get<double>(), frames[f][i].at(1).get<double>()};
        gt.visibility[i] = vis[f][i].get<int>();
      }
      if (gt.visible_count() == 0) throw Error("ground truth: frame without visible keypoints");
      gt.scale = (scales && !(*scales)[f].is_null()) ? (*scales)[f].get<double>()
                                                     : bbox_scale(gt.keypoints, gt.visibility);
      check_gt(gt);
      out.push_back(gt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed ground truth: ") + e.what());
  }
  return out;
}

KeypointConstants load_keypoint_constants(std::istream& in) {
  KeypointConstants k;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (!doc.is_object() || doc.size() != kNumKeypoints) {
      throw Error("constants: expected an object with 17 named entries");
    }
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      const auto name = std::string(keypoint_name(static_cast<KeypointName>(i)));
      k.k[i] = doc.at(name).get<double>();
      if (!(k.k[i] > 0.0) || !std::isfinite(k.k[i])) {
        throw Error("constants: '" + name + "' must be positive");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed constants file: ") + e.what());
  }
  return k;
}

}  // namespace racewalk
