#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "racewalk/pose_data.hpp"
#include "racewalk/preprocess.hpp"

namespace racewalk {

// Body proportions in nose-to-mid-hip units, plus the camera scale.
struct Anthropometry {
  double thigh = 0.75;
  double shank = 0.75;
  double shoulder_height = 0.75;  // shoulders along the hip-to-nose axis
  double upper_arm = 0.5;
  double forearm = 0.45;
  double pixels_per_unit = 300.0;
};

struct GaitParams {
  std::string video_id = "synth";
  std::string walker_id = "A";
  std::size_t n_frames = 150;
  double fps = 60.0;
  double cycle_frames = 70.0;   // frames per two-step cycle
  double forward_speed = 0.05;  // body lengths per frame
  FaultLabel fault = FaultLabel::kNormal;
  double severity = 0.0;        // BK: degrees of stance flexion, LC: lift in body lengths
  double noise_sigma = 1.5;     // pixels
  std::uint64_t seed = 0;
  WalkDirection direction = WalkDirection::kPositive;
  Anthropometry body;
  double thigh_swing_deg = 28.0;    // peak thigh angle from vertical
  double swing_flexion_deg = 70.0;  // peak knee flexion in swing
  double flight_leg_lift = 0.6;     // swing-side leg lift per unit of LC lift

  /// Throws Error("invalid params") naming the offending field.
  void validate() const;
};

inline constexpr double kDefaultBkSeverityDeg = 15.0;
inline constexpr double kDefaultLcLift = 0.1;
inline constexpr double kDefaultNoisePx = 1.5;

struct FrameEvents {
  bool left_support = false;
  bool right_support = false;
  bool flight = false;
};

struct SynthSample {
  PoseSequence sequence;
  FaultLabel label = FaultLabel::kNormal;
  std::vector<FrameEvents> events;
  double ground_line_px = 0.0;  // image y of the ground
  double pixels_per_unit = 0.0;
};

/// Layered-sinusoid race-walk template rendered to image pixels.
/// Deterministic for a given params (seed included).
SynthSample generate_sequence(const GaitParams& params);

struct SynthDatasetSpec {
  std::size_t n_walkers = 4;
  std::size_t samples_per_class = 15;
  std::uint64_t seed = 1;
  GaitParams base;
  double bk_severity_deg = kDefaultBkSeverityDeg;
  double lc_lift = kDefaultLcLift;
  double limb_variation = 0.10;  // per-walker relative spread of body proportions
};

struct SynthDataset {
  std::vector<SynthSample> samples;
  std::vector<LabelRecord> labels;
};

/// Walkers are named A, B, C, ...; samples_per_class videos of each class per
/// walker, with every referee column set to the generated label.
SynthDataset generate_dataset(const SynthDatasetSpec& spec);

/// Writes <dir>/keypoints/<video_id>.json and <dir>/labels.csv.
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace racewalk
