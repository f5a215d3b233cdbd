#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "racewalk/geometry.hpp"

namespace racewalk {

inline constexpr std::size_t kNumKeypoints = 17;

// Fixed keypoint order used by every file format and array in the project.
// Index i of a serialized frame is KeypointName{i}.
enum class KeypointName : std::uint8_t {
  kNose = 0,
  kLeftEye,
  kRightEye,
  kLeftEar,
  kRightEar,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

/// Short snake_case name ("nose", "l_eye", ..., "r_ankle").
std::string_view keypoint_name(KeypointName kp);
std::optional<KeypointName> keypoint_from_name(std::string_view name);

constexpr std::size_t index_of(KeypointName kp) { return static_cast<std::size_t>(kp); }

struct Keypoint {
  double x = 0.0;  // pixels, image coordinates
  double y = 0.0;  // pixels, grows downward
  double confidence = 0.0;

  Point2 position() const { return {x, y}; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Pose {
  std::array<Keypoint, kNumKeypoints> keypoints{};

  const Keypoint& operator[](KeypointName kp) const { return keypoints[index_of(kp)]; }
  Keypoint& operator[](KeypointName kp) { return keypoints[index_of(kp)]; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct PoseSequence {
  std::string video_id;
  std::string walker_id;
  double fps = 0.0;
  std::vector<Pose> frames;

  std::size_t size() const { return frames.size(); }
  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

enum class FaultLabel : std::uint8_t { kNormal, kBentKnee, kLossOfContact };

/// "normal", "bk", "lc".
std::string_view to_string(FaultLabel label);
/// Case-insensitive inverse of to_string; throws Error on unknown text.
FaultLabel parse_fault_label(std::string_view text);

struct LabelRecord {
  std::string video_id;
  std::array<FaultLabel, 3> referee_judgments{};
  std::optional<FaultLabel> resolved;  // nullopt = unresolved three-way split
};

/// Strict majority of three referee judgments; nullopt when all three differ.
std::optional<FaultLabel> resolve_labels(const std::array<FaultLabel, 3>& judgments);

LabelRecord make_label_record(std::string video_id, const std::array<FaultLabel, 3>& judgments);

struct Dataset {
  std::vector<PoseSequence> sequences;
  std::map<std::string, LabelRecord> labels;

  FaultLabel label_of(const std::string& video_id) const;
};

struct AssembledDataset {
  Dataset dataset;
  std::vector<std::string> excluded_unresolved;
  std::vector<std::string> excluded_unlabeled;
};

// Keypoint JSON:
//   {"video_id": str, "walker_id": str, "fps": num,
//    "frames": [[[x, y, confidence] x 17] ...]}
PoseSequence load_keypoint_file(std::istream& in);
PoseSequence load_keypoint_file(const std::string& path);
void write_keypoint_file(std::ostream& out, const PoseSequence& seq);
void write_keypoint_file(const std::string& path, const PoseSequence& seq);

/// Checks the PoseSequence invariants; throws Error on violation.
void validate(const PoseSequence& seq);

// Labels CSV: header `video_id,referee1,referee2,referee3`.
std::vector<LabelRecord> load_labels_csv(std::istream& in);
std::vector<LabelRecord> load_labels_csv(const std::string& path);
void write_labels_csv(std::ostream& out, std::span<const LabelRecord> records);

/// Joins sequences with their labels. Unresolved and unlabeled videos are
/// dropped and listed in the result; a label without a sequence or a
/// duplicated video_id is an error.
AssembledDataset assemble_dataset(std::vector<PoseSequence> sequences,
                                  std::vector<LabelRecord> records);

}  // namespace racewalk
