#include "racewalk/preprocess.hpp"

#include <cmath>
#include <numbers>

#include "racewalk/error.hpp"

namespace racewalk {
namespace {

std::size_t hip_index(Side s) {
  return index_of(s == Side::kLeft ? KeypointName::kLeftHip : KeypointName::kRightHip);
}
std::size_t knee_index(Side s) {
  return index_of(s == Side::kLeft ? KeypointName::kLeftKnee : KeypointName::kRightKnee);
}
std::size_t ankle_index(Side s) {
  return index_of(s == Side::kLeft ? KeypointName::kLeftAnkle : KeypointName::kRightAnkle);
}

}  // namespace

WalkDirection walking_direction(const PoseSequence& seq) {
  if (seq.frames.size() < 2) throw Error("ambiguous direction: need at least 2 frames");
  const std::size_t nose = index_of(KeypointName::kNose);
  double sum = 0.0;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    sum += seq.frames[t].keypoints[nose].x - seq.frames[t - 1].keypoints[nose].x;
  }
  const double mean = sum / static_cast<double>(seq.frames.size() - 1);
  if (mean > 0.0) return WalkDirection::kPositive;
  if (mean < 0.0) return WalkDirection::kNegative;
  throw Error("ambiguous direction: zero net nose displacement");
}

Point2 NormalizedFrame::hip(Side s) const { return points[hip_index(s)]; }
Point2 NormalizedFrame::knee(Side s) const { return points[knee_index(s)]; }
Point2 NormalizedFrame::ankle(Side s) const { return points[ankle_index(s)]; }
Point2 NormalizedFrame::shank(Side s) const {
  return points[s == Side::kLeft ? kLeftShankIndex : kRightShankIndex];
}

NormalizedFrame normalize_pose(const Pose& pose, WalkDirection direction) {
  const Point2 nose = pose[KeypointName::kNose].position();
  const Point2 mid_hip =
      midpoint(pose[KeypointName::kLeftHip].position(), pose[KeypointName::kRightHip].position());
  const double length = norm(mid_hip - nose);
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw Error("degenerate frame: nose-to-hip length is zero or not finite");
  }

  // Image y grows downward; the body frame has y up and x along the walk.
  const double sx = static_cast<int>(direction) / length;
  const double sy = -1.0 / length;
  NormalizedFrame out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const Point2 d = pose.keypoints[i].position() - nose;
    out.points[i] = {sx * d.x, sy * d.y};
  }
  out.points[kLeftShankIndex] = shank_point(out.knee(Side::kLeft), out.ankle(Side::kLeft));
  out.points[kRightShankIndex] = shank_point(out.knee(Side::kRight), out.ankle(Side::kRight));
  return out;
}

Point2 shank_point(Point2 knee, Point2 ankle) { return midpoint(knee, ankle); }

double knee_angle(Point2 hip, Point2 knee, Point2 ankle) {
  const Point2 thigh = hip - knee;
  const Point2 calf = ankle - knee;
  if (norm(thigh) == 0.0 || norm(calf) == 0.0) {
    throw Error("degenerate limb: zero-length thigh or calf");
  }
  double deg = std::atan2(cross(thigh, calf), dot(thigh, calf)) * (180.0 / std::numbers::pi);
  if (deg <= 0.0) deg += 360.0;
  return deg;
}

KneeAngleSeries knee_angle_series(std::span<const NormalizedFrame> frames, Side side) {
  KneeAngleSeries series{side, {}};
  series.theta.reserve(frames.size());
  for (const auto& f : frames) {
    series.theta.push_back(knee_angle(f.hip(side), f.knee(side), f.ankle(side)));
  }
  return series;
}

NormalizedSequence normalize_sequence(const PoseSequence& seq) {
  NormalizedSequence out;
  out.direction = walking_direction(seq);
  out.frames.reserve(seq.frames.size());
  for (const auto& pose : seq.frames) out.frames.push_back(normalize_pose(pose, out.direction));
  out.left_knee = knee_angle_series(out.frames, Side::kLeft);
  out.right_knee = knee_angle_series(out.frames, Side::kRight);
  return out;
}

OutlierScreenReport reject_outliers(const std::map<std::string, KneeAngleSeries>& right_knee,
                                    double k) {
  if (right_knee.empty()) throw Error("reject_outliers: empty input");
  if (!(k > 0.0)) throw Error("reject_outliers: multiplier must be positive");

  // Two-pass pooled mean and SD, iterating videos in key order.
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [id, series] : right_knee) {
    if (series.theta.size() < 2) throw Error("reject_outliers: series '" + id + "' too short");
    for (std::size_t t = 1; t < series.theta.size(); ++t) {
      sum += series.theta[t] - series.theta[t - 1];
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (const auto& [id, series] : right_knee) {
    for (std::size_t t = 1; t < series.theta.size(); ++t) {
      const double d = series.theta[t] - series.theta[t - 1] - mean;
      sq += d * d;
    }
  }

  OutlierScreenReport report;
  report.pooled_sigma = std::sqrt(sq / static_cast<double>(count));
  report.multiplier = k;
  const double limit = k * report.pooled_sigma;
  for (const auto& [id, series] : right_knee) {
    bool outlier = false;
    if (report.pooled_sigma > 0.0) {
      for (std::size_t t = 1; t < series.theta.size() && !outlier; ++t) {
        outlier = std::abs(series.theta[t] - series.theta[t - 1]) > limit;
      }
    }
    (outlier ? report.removed : report.kept).push_back(id);
  }
  return report;
}

}  // namespace racewalk
