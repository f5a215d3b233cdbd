#include "racewalk/gait_cycle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "racewalk/error.hpp"

namespace racewalk {
namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "hip-x", "hip-y", "knee-x", "knee-y", "shank-x", "shank-y", "ankle-x", "ankle-y", "knee-angle",
};
constexpr std::array<std::string_view, 4> kJointNames = {"hip", "knee", "shank", "ankle"};

// Prominence of the minimum at i: the lower of the two highest points
// reached before the series dips below theta[i] on either side.
double minimum_prominence(std::span<const double> theta, std::size_t i) {
  const double v = theta[i];
  double left_max = v;
  for (std::size_t j = i; j-- > 0;) {
    if (theta[j] < v) break;
    left_max = std::max(left_max, theta[j]);
  }
  double right_max = v;
  for (std::size_t j = i + 1; j < theta.size(); ++j) {
    if (theta[j] < v) break;
    right_max = std::max(right_max, theta[j]);
  }
  return std::min(left_max, right_max) - v;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(FeatureCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::size_t coordinate_channel(Side side, Joint joint, bool y) {
  return (side == Side::kLeft ? 0 : 8) + 2 * static_cast<std::size_t>(joint) + (y ? 1 : 0);
}

std::size_t knee_angle_channel(Side side) { return side == Side::kLeft ? 16 : 17; }

std::string channel_name(std::size_t channel) {
  if (channel >= kNumChannels) throw Error("channel index out of range");
  if (channel == 16) return "l_knee_angle";
  if (channel == 17) return "r_knee_angle";
  std::string name = channel < 8 ? "l_" : "r_";
  name += kJointNames[(channel / 2) % 4];
  name += channel % 2 == 0 ? "_x" : "_y";
  return name;
}

FeatureCategory category_of_channel(std::size_t channel) {
  if (channel >= kNumChannels) throw Error("channel index out of range");
  if (channel >= 16) return FeatureCategory::kKneeAngle;
  return static_cast<FeatureCategory>(channel % 8);
}

FeatureCategory category_of_feature(std::size_t index) {
  if (index >= kNumFeatures) throw Error("feature index out of range");
  return category_of_channel(index / kCycleSamples);
}

std::vector<std::size_t> find_cycle_minima(std::span<const double> theta,
                                           const CycleDetectionOptions& options) {
  // Strict local minima; a flat bottom counts once, at its middle sample.
  std::vector<std::size_t> candidates;
  const std::size_t n = theta.size();
  for (std::size_t i = 1; i + 1 < n;) {
    if (theta[i] < theta[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && theta[j + 1] == theta[i]) ++j;
      if (j + 1 < n && theta[j + 1] > theta[i]) candidates.push_back((i + j) / 2);
      i = j + 1;
    } else {
      ++i;
    }
  }

  std::vector<std::size_t> prominent;
  for (const auto i : candidates) {
    if (minimum_prominence(theta, i) >= options.min_prominence_deg) prominent.push_back(i);
  }

  // Deepest first; ties go to the earlier frame.
  std::vector<std::size_t> order = prominent;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return theta[a] < theta[b]; });
  std::vector<std::size_t> kept;
  for (const auto i : order) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const std::size_t gap = i > k ? i - k : k - i;
      return gap >= options.min_separation_frames;
    });
    if (clear) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

CycleWindow detect_cycle(std::span<const double> right_knee_theta,
                         const CycleDetectionOptions& options) {
  const auto minima = find_cycle_minima(right_knee_theta, options);
  if (minima.size() < 2) {
    throw Error("no full cycle: found " + std::to_string(minima.size()) +
                " qualifying knee-angle minima");
  }
  std::size_t best = 0;
  for (std::size_t m = 1; m + 1 < minima.size(); ++m) {
    if (right_knee_theta[minima[m]] < right_knee_theta[minima[best]]) best = m;
  }
  return {minima[best], minima[best + 1]};
}

std::vector<double> resample(std::span<const double> series, std::size_t n) {
  if (series.size() < 2) throw Error("resample: window shorter than 2 frames");
  if (n < 2) throw Error("resample: target length must be at least 2");
  const std::size_t last = series.size() - 1;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == n - 1) {
      out[j] = series[last];
      continue;
    }
    const double pos = static_cast<double>(j) * static_cast<double>(last) / static_cast<double>(n - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), last - 1);
    const double frac = pos - static_cast<double>(i);
    out[j] = frac == 0.0 ? series[i] : series[i] + frac * (series[i + 1] - series[i]);
  }
  return out;
}

FeatureVector assemble_features(const ChannelMatrix& matrix) {
  FeatureVector fv;
  fv.values.reserve(kNumFeatures);
  for (const auto& channel : matrix.values) fv.values.insert(fv.values.end(), channel.begin(), channel.end());
  return fv;
}

ChannelMatrix unflatten(const FeatureVector& features) {
  if (features.values.size() != kNumFeatures) throw Error("feature vector length is not 1530");
  if (features.layout_version != kLayoutVersion) {
    throw Error("layout mismatch: expected " + std::string(kLayoutVersion) + ", got " +
                features.layout_version);
  }
  ChannelMatrix m;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (std::size_t f = 0; f < kCycleSamples; ++f) m.at(c, f) = features.values[feature_index(c, f)];
  }
  return m;
}

ChannelMatrix build_channel_matrix(const NormalizedSequence& seq, const CycleWindow& window) {
  if (window.start_frame >= window.end_frame || window.end_frame >= seq.frames.size()) {
    throw Error("cycle window outside the sequence");
  }
  ChannelMatrix m;
  std::vector<double> buf(window.length());
  const auto fill = [&](std::size_t channel, auto&& value_at) {
    for (std::size_t t = 0; t < buf.size(); ++t) buf[t] = value_at(window.start_frame + t);
    const auto r = resample(buf, kCycleSamples);
    std::copy(r.begin(), r.end(), m.values[channel].begin());
  };

  for (const Side side : {Side::kLeft, Side::kRight}) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto joint = static_cast<Joint>(j);
      const auto point_at = [&](std::size_t t) {
        const auto& f = seq.frames[t];
        switch (joint) {
          case Joint::kHip: return f.hip(side);
          case Joint::kKnee: return f.knee(side);
          case Joint::kShank: return f.shank(side);
          case Joint::kAnkle: return f.ankle(side);
        }
        return Point2{};
      };
      fill(coordinate_channel(side, joint, false), [&](std::size_t t) { return point_at(t).x; });
      fill(coordinate_channel(side, joint, true), [&](std::size_t t) { return point_at(t).y; });
    }
  }
  fill(knee_angle_channel(Side::kLeft), [&](std::size_t t) { return seq.left_knee.theta[t]; });
  fill(knee_angle_channel(Side::kRight), [&](std::size_t t) { return seq.right_knee.theta[t]; });
  return m;
}

ProcessedCycle make_processed_cycle(std::string video_id, std::string walker_id, FaultLabel label,
                                    const ChannelMatrix& matrix) {
  return {std::move(video_id), std::move(walker_id), label, matrix, assemble_features(matrix)};
}

void write_processed_csv(std::ostream& out, std::span<const ProcessedCycle> cycles) {
  std::string line = "video_id,walker_id,label";
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (std::size_t f = 0; f < kCycleSamples; ++f) {
      line += ",c" + std::to_string(c) + "_f" + std::to_string(f);
    }
  }
  out << line << '\n';
  for (const auto& cycle : cycles) {
    if (cycle.features.values.size() != kNumFeatures) throw Error("feature vector length is not 1530");
    line = cycle.video_id + ',' + cycle.walker_id + ',' + std::string(to_string(cycle.label));
    for (const double v : cycle.features.values) {
      line += ',';
      append_number(line, v);
    }
    out << line << '\n';
  }
}

std::vector<ProcessedCycle> read_processed_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("processed csv: empty input");
  const auto header = split(line, ',');
  if (header.size() != 3 + kNumFeatures || header[0] != "video_id" || header[1] != "walker_id" ||
      header[2] != "label") {
    throw Error("processed csv: unexpected header (layout " + std::string(kLayoutVersion) + ")");
  }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const std::string expected =
        "c" + std::to_string(i / kCycleSamples) + "_f" + std::to_string(i % kCycleSamples);
    if (header[3 + i] != expected) throw Error("processed csv: column '" + expected + "' misplaced");
  }

  std::vector<ProcessedCycle> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3 + kNumFeatures) {
      throw Error("processed csv: wrong column count at line " + std::to_string(line_no));
    }
    ProcessedCycle cycle;
    cycle.video_id = std::string(cells[0]);
    cycle.walker_id = std::string(cells[1]);
    cycle.label = parse_fault_label(cells[2]);
    cycle.features.values.resize(kNumFeatures);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      const std::string cell(cells[3 + i]);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
        throw Error("processed csv: bad number at line " + std::to_string(line_no));
      }
      cycle.features.values[i] = v;
    }
    cycle.matrix = unflatten(cycle.features);
    out.push_back(std::move(cycle));
  }
  return out;
}

}  // namespace racewalk
