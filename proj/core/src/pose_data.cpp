#include "racewalk/pose_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "racewalk/error.hpp"

namespace racewalk {
namespace {

constexpr std::array<std::string_view, kNumKeypoints> kKeypointNames = {
    "nose",       "l_eye",      "r_eye",   "l_ear",   "r_ear",  "l_shoulder",
    "r_shoulder", "l_elbow",    "r_elbow", "l_wrist", "r_wrist", "l_hip",
    "r_hip",      "l_knee",     "r_knee",  "l_ankle", "r_ankle",
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string_view keypoint_name(KeypointName kp) { return kKeypointNames[index_of(kp)]; }

std::optional<KeypointName> keypoint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (kKeypointNames[i] == name) return static_cast<KeypointName>(i);
  }
  return std::nullopt;
}

std::string_view to_string(FaultLabel label) {
  switch (label) {
    case FaultLabel::kNormal: return "normal";
    case FaultLabel::kBentKnee: return "bk";
    case FaultLabel::kLossOfContact: return "lc";
  }
  return "?";
}

FaultLabel parse_fault_label(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "normal") return FaultLabel::kNormal;
  if (t == "bk") return FaultLabel::kBentKnee;
  if (t == "lc") return FaultLabel::kLossOfContact;
  throw Error("unknown fault label '" + std::string(text) + "'");
}

std::optional<FaultLabel> resolve_labels(const std::array<FaultLabel, 3>& j) {
  if (j[0] == j[1] || j[0] == j[2]) return j[0];
  if (j[1] == j[2]) return j[1];
  return std::nullopt;
}

LabelRecord make_label_record(std::string video_id, const std::array<FaultLabel, 3>& judgments) {
  return {std::move(video_id), judgments, resolve_labels(judgments)};
}

FaultLabel Dataset::label_of(const std::string& video_id) const {
  const auto it = labels.find(video_id);
  if (it == labels.end() || !it->second.resolved) {
    throw Error("no resolved label for video '" + video_id + "'");
  }
  return *it->second.resolved;
}

void validate(const PoseSequence& seq) {
  if (seq.video_id.empty()) throw Error("missing metadata: video_id");
  if (seq.walker_id.empty()) throw Error("missing metadata: walker_id");
  if (!(seq.fps > 0.0) || !std::isfinite(seq.fps)) throw Error("invalid fps");
  if (seq.frames.size() < 2) throw Error("too few frames: need at least 2");
  for (const auto& pose : seq.frames) {
    for (const auto& kp : pose.keypoints) {
      if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) throw Error("non-finite coordinate");
      if (!(kp.confidence >= 0.0 && kp.confidence <= 1.0)) {
        throw Error("confidence outside [0,1]");
      }
    }
  }
}

PoseSequence load_keypoint_file(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw Error("malformed document: top level is not an object");

  PoseSequence seq;
  try {
    for (const char* field : {"video_id", "walker_id", "fps", "frames"}) {
      if (!doc.contains(field)) throw Error(std::string("missing metadata: ") + field);
    }
    seq.video_id = doc.at("video_id").get<std::string>();
    seq.walker_id = doc.at("walker_id").get<std::string>();
    seq.fps = doc.at("fps").get<double>();
    const auto& frames = doc.at("frames");
    if (!frames.is_array()) throw Error("malformed document: frames is not an array");
    seq.frames.reserve(frames.size());
    for (const auto& frame : frames) {
      if (!frame.is_array() || frame.size() != kNumKeypoints) {
        throw Error("keypoint count: expected 17 per frame, got " +
                    std::to_string(frame.is_array() ? frame.size() : 0));
      }
      Pose pose;
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const auto& triple = frame[i];
        if (!triple.is_array() || triple.size() != 3) {
          throw Error("malformed document: keypoint is not an [x, y, confidence] triple");
        }
        for (const auto& v : triple) {
          if (!v.is_number()) throw Error("non-finite coordinate");
        }
        pose.keypoints[i] = {triple[0].get<double>(), triple[1].get<double>(),
                             triple[2].get<double>()};
      }
      seq.frames.push_back(pose);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed document: ") + e.what());
  }
  validate(seq);
  return seq;
}

PoseSequence load_keypoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return load_keypoint_file(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_keypoint_file(std::ostream& out, const PoseSequence& seq) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& pose : seq.frames) {
    nlohmann::json frame = nlohmann::json::array();
    for (const auto& kp : pose.keypoints) frame.push_back({kp.x, kp.y, kp.confidence});
    frames.push_back(std::move(frame));
  }
  nlohmann::ordered_json doc;
  doc["video_id"] = seq.video_id;
  doc["walker_id"] = seq.walker_id;
  doc["fps"] = seq.fps;
  doc["frames"] = std::move(frames);
  out << doc.dump() << '\n';
}

void write_keypoint_file(const std::string& path, const PoseSequence& seq) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_keypoint_file(out, seq);
}

std::vector<LabelRecord> load_labels_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("labels: empty file");
  const auto header = split_csv_line(line);
  if (header.size() != 4 || lower(header[0]) != "video_id" || lower(header[1]) != "referee1" ||
      lower(header[2]) != "referee2" || lower(header[3]) != "referee3") {
    throw Error("labels: expected header video_id,referee1,referee2,referee3");
  }
  std::vector<LabelRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4 || cells[0].empty()) {
      throw Error("labels: malformed row at line " + std::to_string(line_no));
    }
    records.push_back(make_label_record(
        cells[0],
        {parse_fault_label(cells[1]), parse_fault_label(cells[2]), parse_fault_label(cells[3])}));
  }
  return records;
}

std::vector<LabelRecord> load_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_labels_csv(in);
}

void write_labels_csv(std::ostream& out, std::span<const LabelRecord> records) {
  out << "video_id,referee1,referee2,referee3\n";
  for (const auto& r : records) {
    out << r.video_id << ',' << to_string(r.referee_judgments[0]) << ','
        << to_string(r.referee_judgments[1]) << ',' << to_string(r.referee_judgments[2]) << '\n';
  }
}

AssembledDataset assemble_dataset(std::vector<PoseSequence> sequences,
                                  std::vector<LabelRecord> records) {
  std::set<std::string> seq_ids;
  for (const auto& s : sequences) {
    if (s.walker_id.empty()) throw Error("sequence '" + s.video_id + "' has no walker_id");
    if (!seq_ids.insert(s.video_id).second) {
      throw Error("duplicate video_id '" + s.video_id + "'");
    }
  }

  AssembledDataset out;
  std::map<std::string, LabelRecord> by_id;
  for (auto& r : records) {
    if (!seq_ids.contains(r.video_id)) {
      throw Error("label for unknown video_id '" + r.video_id + "'");
    }
    if (by_id.contains(r.video_id)) {
      throw Error("duplicate label for video_id '" + r.video_id + "'");
    }
    by_id.emplace(r.video_id, std::move(r));
  }

  for (auto& s : sequences) {
    const auto it = by_id.find(s.video_id);
    if (it == by_id.end()) {
      out.excluded_unlabeled.push_back(s.video_id);
      continue;
    }
    if (!it->second.resolved) {
      out.excluded_unresolved.push_back(s.video_id);
      continue;
    }
    out.dataset.labels.emplace(it->first, it->second);
    out.dataset.sequences.push_back(std::move(s));
  }
  return out;
}

}  // namespace racewalk
