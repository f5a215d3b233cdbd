#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "racewalk/pose_data.hpp"
#include "racewalk/preprocess.hpp"

namespace racewalk {

inline constexpr std::size_t kCycleSamples = 85;
inline constexpr std::size_t kNumChannels = 18;
inline constexpr std::size_t kNumFeatures = kNumChannels * kCycleSamples;  // 1530
inline constexpr std::string_view kLayoutVersion = "v1";

// Channel layout v1: for side in (left, right), for joint in (hip, knee,
// shank, ankle), x then y -> channels 0..15; 16 = left knee angle,
// 17 = right knee angle.
enum class Joint : std::uint8_t { kHip, kKnee, kShank, kAnkle };

enum class FeatureCategory : std::uint8_t {
  kHipX,
  kHipY,
  kKneeX,
  kKneeY,
  kShankX,
  kShankY,
  kAnkleX,
  kAnkleY,
  kKneeAngle,
};
inline constexpr std::size_t kNumCategories = 9;

std::string_view to_string(FeatureCategory c);
std::string channel_name(std::size_t channel);
std::size_t coordinate_channel(Side side, Joint joint, bool y);
std::size_t knee_angle_channel(Side side);
FeatureCategory category_of_channel(std::size_t channel);

constexpr std::size_t feature_index(std::size_t channel, std::size_t frame) {
  return channel * kCycleSamples + frame;
}
FeatureCategory category_of_feature(std::size_t index);

struct CycleWindow {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // inclusive
  std::size_t length() const { return end_frame - start_frame + 1; }
};

struct CycleDetectionOptions {
  double min_prominence_deg = 20.0;
  std::size_t min_separation_frames = 30;
};

/// Indices of local minima that pass the prominence filter and then the
/// separation filter (deeper minima win), in ascending frame order.
std::vector<std::size_t> find_cycle_minima(std::span<const double> theta,
                                           const CycleDetectionOptions& options);

/// Window from the deepest qualifying minimum that has a successor to that
/// successor. Throws Error("no full cycle") with fewer than two minima.
CycleWindow detect_cycle(std::span<const double> right_knee_theta,
                         const CycleDetectionOptions& options = {});

/// Linear interpolation at n evenly spaced positions over the whole input.
std::vector<double> resample(std::span<const double> series, std::size_t n = kCycleSamples);

struct ChannelMatrix {
  std::array<std::array<double, kCycleSamples>, kNumChannels> values{};

  double& at(std::size_t channel, std::size_t frame) { return values[channel][frame]; }
  double at(std::size_t channel, std::size_t frame) const { return values[channel][frame]; }
  friend bool operator==(const ChannelMatrix&, const ChannelMatrix&) = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::string layout_version{kLayoutVersion};
};

FeatureVector assemble_features(const ChannelMatrix& matrix);
ChannelMatrix unflatten(const FeatureVector& features);

/// Resamples every channel of the window [start, end] to kCycleSamples.
ChannelMatrix build_channel_matrix(const NormalizedSequence& seq, const CycleWindow& window);

struct ProcessedCycle {
  std::string video_id;
  std::string walker_id;
  FaultLabel label = FaultLabel::kNormal;
  ChannelMatrix matrix;
  FeatureVector features;
};

ProcessedCycle make_processed_cycle(std::string video_id, std::string walker_id, FaultLabel label,
                                    const ChannelMatrix& matrix);

// Processed-cycle CSV: video_id,walker_id,label,c0_f0..c17_f84, numbers at 17
// significant digits so that reloading is bit-exact.
void write_processed_csv(std::ostream& out, std::span<const ProcessedCycle> cycles);
std::vector<ProcessedCycle> read_processed_csv(std::istream& in);

}  // namespace racewalk
