#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "racewalk/geometry.hpp"
#include "racewalk/pose_data.hpp"

namespace racewalk {

struct GroundTruthPose {
  std::array<Point2, kNumKeypoints> keypoints{};
  std::array<int, kNumKeypoints> visibility{};  // 0 = not labeled / invisible
  double scale = 0.0;                            // object scale s, > 0

  std::size_t visible_count() const;
};

/// sqrt of the bounding-box area spanned by the visible keypoints.
double bbox_scale(const std::array<Point2, kNumKeypoints>& keypoints,
                  const std::array<int, kNumKeypoints>& visibility);

// Per-keypoint falloff constants k_i. The defaults are the 17 COCO keypoint
// constants (k_i = 2 * sigma_i).
struct KeypointConstants {
  std::array<double, kNumKeypoints> k{};

  static KeypointConstants coco();
};

/// Object keypoint similarity:
///   sum_i exp(-d_i^2 / (2 s^2 k_i^2)) [v_i > 0] / sum_i [v_i > 0]
double oks(const Pose& pred, const GroundTruthPose& gt, const KeypointConstants& k);

/// The per-keypoint terms exp(-d_i^2 / (2 s^2 k_i^2)) of every visible
/// keypoint over all pairs, in pair-then-keypoint order.
std::vector<double> keypoint_similarities(std::span<const Pose> preds,
                                          std::span<const GroundTruthPose> gts,
                                          const KeypointConstants& k);

/// Fraction of visible keypoints whose similarity term exceeds threshold.
double keypoint_ap(std::span<const Pose> preds, std::span<const GroundTruthPose> gts,
                   const KeypointConstants& k, double threshold);

/// Thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> ap_thresholds();

double mean_ap(std::span<const Pose> preds, std::span<const GroundTruthPose> gts,
               const KeypointConstants& k);

// Ground-truth JSON: the keypoint file schema plus `visibility` (one array
// of 17 integers per frame) and an optional `scale` (one number per frame;
// absent or null entries fall back to bbox_scale).
std::vector<GroundTruthPose> load_ground_truth(std::istream& in);
// Constants file: JSON object mapping each of the 17 keypoint names to k_i.
KeypointConstants load_keypoint_constants(std::istream& in);

}  // namespace racewalk
