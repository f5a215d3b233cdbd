#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "racewalk/geometry.hpp"
#include "racewalk/pose_data.hpp"

namespace racewalk {

enum class Side : std::uint8_t { kLeft, kRight };

// +1 when the walker moves toward increasing image x.
enum class WalkDirection : int { kPositive = 1, kNegative = -1 };

/// Sign of the mean frame-to-frame nose x displacement.
/// Throws Error("ambiguous direction") when the net displacement is zero.
WalkDirection walking_direction(const PoseSequence& seq);

inline constexpr std::size_t kNumNormalizedPoints = kNumKeypoints + 2;
inline constexpr std::size_t kLeftShankIndex = kNumKeypoints;
inline constexpr std::size_t kRightShankIndex = kNumKeypoints + 1;

// One pose in the body frame: nose at the origin, nose-to-mid-hip distance 1,
// y up and x along the walking direction. Indices 0..16 follow KeypointName,
// 17 and 18 are the left and right shank points.
struct NormalizedFrame {
  std::array<Point2, kNumNormalizedPoints> points{};

  Point2 operator[](KeypointName kp) const { return points[index_of(kp)]; }
  Point2 hip(Side s) const;
  Point2 knee(Side s) const;
  Point2 ankle(Side s) const;
  Point2 shank(Side s) const;
};

/// Throws Error("degenerate frame") when the nose-to-mid-hip length is zero
/// or not finite.
NormalizedFrame normalize_pose(const Pose& pose, WalkDirection direction);

Point2 shank_point(Point2 knee, Point2 ankle);

/// Counterclockwise angle in degrees from the thigh (knee->hip) to the calf
/// (knee->ankle). 180 is full extension, flexion is below 180 and
/// hyperextension above. Result lies in (0, 360]; an exactly folded limb
/// reports 360.
double knee_angle(Point2 hip, Point2 knee, Point2 ankle);

struct KneeAngleSeries {
  Side side = Side::kRight;
  std::vector<double> theta;
};

KneeAngleSeries knee_angle_series(std::span<const NormalizedFrame> frames, Side side);

struct NormalizedSequence {
  WalkDirection direction = WalkDirection::kPositive;
  std::vector<NormalizedFrame> frames;
  KneeAngleSeries left_knee;
  KneeAngleSeries right_knee;
};

/// Direction, per-frame normalization, and both knee-angle series.
NormalizedSequence normalize_sequence(const PoseSequence& seq);

struct OutlierScreenReport {
  double pooled_sigma = 0.0;
  double multiplier = 0.0;
  std::vector<std::string> removed;
  std::vector<std::string> kept;
};

inline constexpr double kDefaultOutlierSdMultiplier = 3.0;

/// Pools every frame-to-frame change of the right knee angle across all
/// videos, takes its (population) standard deviation sigma, and removes each
/// video with any |change| > k * sigma. sigma == 0 removes nothing.
OutlierScreenReport reject_outliers(const std::map<std::string, KneeAngleSeries>& right_knee,
                                    double k = kDefaultOutlierSdMultiplier);

}  // namespace racewalk
