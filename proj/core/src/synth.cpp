#include "racewalk/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "racewalk/error.hpp"

namespace racewalk {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Right-leg phase (cycle fraction) of peak swing flexion. Heel strike is 0,
// toe-off 0.5; flexion builds from kFlexionStart.
constexpr double kFlexionStart = 0.3;
constexpr double kPeakFlexionPhase = 0.5 * (1.0 + kFlexionStart);
constexpr double kFlightHalfWidth = 0.1;
constexpr double kFlightPeak = 1.2;  // peak lift in units of severity
constexpr double kLeanDeg = 5.0;
constexpr double kGroundLinePx = 1000.0;
constexpr double kMarginPx = 100.0;
constexpr double kConfidence = 0.9;

double frac(double v) { return v - std::floor(v); }

double thigh_angle(double psi, double amplitude) { return amplitude * std::cos(2.0 * std::numbers::pi * psi); }

double knee_flexion(double psi, const GaitParams& p) {
  double beta = 0.0;
  if (psi >= kFlexionStart) {
    const double s = std::sin(std::numbers::pi * (psi - kFlexionStart) / (1.0 - kFlexionStart));
    beta = p.swing_flexion_deg * s * s;
  }
  if (p.fault == FaultLabel::kBentKnee) beta = std::max(beta, p.severity);
  return beta * kDeg;
}

// Circular distance in cycle fraction.
double phase_distance(double a, double b) {
  const double d = std::abs(frac(a - b));
  return std::min(d, 1.0 - d);
}

struct LegPose {
  Point2 knee;   // relative to the leg's hip
  Point2 ankle;  // relative to the leg's hip
};

LegPose leg_pose(double psi, const GaitParams& p) {
  const double alpha = thigh_angle(psi, p.thigh_swing_deg * kDeg);
  const double beta = knee_flexion(psi, p);
  const Point2 knee{p.body.thigh * std::sin(alpha), -p.body.thigh * std::cos(alpha)};
  const Point2 calf{p.body.shank * std::sin(alpha - beta), -p.body.shank * std::cos(alpha - beta)};
  return {knee, knee + calf};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void GaitParams::validate() const {
  const auto fail = [](const std::string& what) { throw Error("invalid params: " + what); };
  if (!(cycle_frames >= 20.0)) fail("cycle_frames must be >= 20");
  if (!(static_cast<double>(n_frames) >= 2.0 * cycle_frames)) fail("n_frames must be >= 2 * cycle_frames");
  if (!(fps > 0.0)) fail("fps must be positive");
  if (!(severity >= 0.0)) fail("severity must be >= 0");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(forward_speed > 0.0)) fail("forward_speed must be positive");
  if (!(body.thigh > 0.0 && body.shank > 0.0 && body.pixels_per_unit > 0.0)) {
    fail("body proportions must be positive");
  }
  if (fault == FaultLabel::kBentKnee && !(severity < swing_flexion_deg)) {
    fail("BK severity must stay below the swing flexion");
  }
  if (video_id.empty() || walker_id.empty()) fail("video_id and walker_id are required");
}

SynthSample generate_sequence(const GaitParams& p) {
  p.validate();
  const double c = p.cycle_frames;
  const double n = static_cast<double>(p.n_frames);
  // Centre the whole cycles in the clip so every right-knee flexion peak has
  // at least half a cycle of context on both sides.
  const double whole = std::floor(n / c);
  const double first_peak = 0.5 * (c + (n - whole * c));
  const double phase0 = kPeakFlexionPhase - first_peak / c;

  const double s = p.body.pixels_per_unit;
  const int dir = static_cast<int>(p.direction);
  const double travel = p.forward_speed * n * s;
  const double x_origin = dir > 0 ? kMarginPx : kMarginPx + travel + 2.0 * s;
  const Point2 lean{std::sin(kLeanDeg * kDeg), std::cos(kLeanDeg * kDeg)};

  SynthSample out;
  out.label = p.fault;
  out.ground_line_px = kGroundLinePx;
  out.pixels_per_unit = s;
  out.sequence.video_id = p.video_id;
  out.sequence.walker_id = p.walker_id;
  out.sequence.fps = p.fps;
  out.sequence.frames.reserve(p.n_frames);
  out.events.reserve(p.n_frames);

  for (std::size_t t = 0; t < p.n_frames; ++t) {
    const double tau = static_cast<double>(t) / c + phase0;
    const double psi_r = frac(tau);
    const double psi_l = frac(tau + 0.5);
    const LegPose right = leg_pose(psi_r, p);
    const LegPose left = leg_pose(psi_l, p);

    // Flight windows straddle both step transitions; the leg entering swing
    // is lifted with the body.
    double lift = 0.0;
    double lift_left = 0.0;
    double lift_right = 0.0;
    if (p.fault == FaultLabel::kLossOfContact) {
      const double d_right_strike = phase_distance(psi_r, 0.0);
      const double d_left_strike = phase_distance(psi_r, 0.5);
      const double d = std::min(d_right_strike, d_left_strike);
      if (d < kFlightHalfWidth) {
        const double c = std::cos(0.5 * std::numbers::pi * d / kFlightHalfWidth);
        lift = kFlightPeak * p.severity * c * c;
        (d_right_strike <= d_left_strike ? lift_left : lift_right) = p.flight_leg_lift * lift;
      }
    }

    // Lowest ankle on the ground, the whole body raised by the flight lift.
    const double hip_y =
        -std::min(left.ankle.y + lift_left, right.ankle.y + lift_right) + lift;
    const Point2 hip_center{p.forward_speed * static_cast<double>(t), hip_y};
    const Point2 hip_l = hip_center;
    const Point2 hip_r = hip_center;
    const Point2 raise_l{0.0, lift_left};
    const Point2 raise_r{0.0, lift_right};

    const Point2 nose = hip_center + lean;
    const Point2 shoulder = hip_center + p.body.shoulder_height * lean;
    const auto arm = [&](double psi) {
      const double swing = -0.8 * thigh_angle(psi, p.thigh_swing_deg * kDeg);
      const Point2 elbow = shoulder + Point2{p.body.upper_arm * std::sin(swing),
                                             -p.body.upper_arm * std::cos(swing)};
      const double fore = swing + 80.0 * kDeg;
      const Point2 wrist = elbow + Point2{p.body.forearm * std::sin(fore), -p.body.forearm * std::cos(fore)};
      return std::pair{elbow, wrist};
    };
    const auto [elbow_l, wrist_l] = arm(psi_l);
    const auto [elbow_r, wrist_r] = arm(psi_r);

    std::array<Point2, kNumKeypoints> world{};
    world[index_of(KeypointName::kNose)] = nose;
    world[index_of(KeypointName::kLeftEye)] = nose + Point2{-0.03, 0.04};
    world[index_of(KeypointName::kRightEye)] = nose + Point2{-0.02, 0.045};
    world[index_of(KeypointName::kLeftEar)] = nose + Point2{-0.13, 0.02};
    world[index_of(KeypointName::kRightEar)] = nose + Point2{-0.11, 0.025};
    world[index_of(KeypointName::kLeftShoulder)] = shoulder + Point2{-0.01, 0.0};
    world[index_of(KeypointName::kRightShoulder)] = shoulder + Point2{0.01, 0.0};
    world[index_of(KeypointName::kLeftElbow)] = elbow_l;
    world[index_of(KeypointName::kRightElbow)] = elbow_r;
    world[index_of(KeypointName::kLeftWrist)] = wrist_l;
    world[index_of(KeypointName::kRightWrist)] = wrist_r;
    world[index_of(KeypointName::kLeftHip)] = hip_l;
    world[index_of(KeypointName::kRightHip)] = hip_r;
    world[index_of(KeypointName::kLeftKnee)] = hip_l + left.knee + raise_l;
    world[index_of(KeypointName::kRightKnee)] = hip_r + right.knee + raise_r;
    world[index_of(KeypointName::kLeftAnkle)] = hip_l + left.ankle + raise_l;
    world[index_of(KeypointName::kRightAnkle)] = hip_r + right.ankle + raise_r;

    Pose pose;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      pose.keypoints[i] = {x_origin + dir * s * world[i].x, kGroundLinePx - s * world[i].y,
                           kConfidence};
    }
    out.sequence.frames.push_back(pose);
    out.events.push_back({psi_l < 0.5 && lift == 0.0, psi_r < 0.5 && lift == 0.0, lift > 0.0});
  }

  if (p.noise_sigma > 0.0) {
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> noise(0.0, p.noise_sigma);
    for (auto& pose : out.sequence.frames) {
      for (auto& kp : pose.keypoints) {
        kp.x += noise(rng);
        kp.y += noise(rng);
      }
    }
  }
  return out;
}

SynthDataset generate_dataset(const SynthDatasetSpec& spec) {
  if (spec.n_walkers < 2) throw Error("invalid params: n_walkers must be >= 2");
  if (spec.n_walkers > 26) throw Error("invalid params: at most 26 walkers (A-Z)");
  if (spec.samples_per_class == 0) throw Error("invalid params: samples_per_class must be >= 1");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto vary = [&](double base, double rel) { return base * (1.0 + rel * unit(rng)); };

  SynthDataset out;
  for (std::size_t w = 0; w < spec.n_walkers; ++w) {
    const std::string walker(1, static_cast<char>('A' + w));
    GaitParams walker_params = spec.base;
    walker_params.walker_id = walker;
    walker_params.body.thigh = vary(spec.base.body.thigh, spec.limb_variation);
    walker_params.body.shank = vary(spec.base.body.shank, spec.limb_variation);
    walker_params.body.upper_arm = vary(spec.base.body.upper_arm, spec.limb_variation);
    walker_params.body.forearm = vary(spec.base.body.forearm, spec.limb_variation);
    walker_params.body.pixels_per_unit = vary(spec.base.body.pixels_per_unit, spec.limb_variation);
    walker_params.thigh_swing_deg = vary(spec.base.thigh_swing_deg, 0.08);
    walker_params.swing_flexion_deg = vary(spec.base.swing_flexion_deg, 0.08);
    walker_params.cycle_frames = vary(spec.base.cycle_frames, 0.03);

    for (const FaultLabel label :
         {FaultLabel::kNormal, FaultLabel::kBentKnee, FaultLabel::kLossOfContact}) {
      for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
        GaitParams p = walker_params;
        p.fault = label;
        p.severity = label == FaultLabel::kBentKnee        ? spec.bk_severity_deg
                     : label == FaultLabel::kLossOfContact ? spec.lc_lift
                                                           : 0.0;
        p.body.thigh = vary(walker_params.body.thigh, 0.04);
        p.body.shank = vary(walker_params.body.shank, 0.04);
        p.thigh_swing_deg = vary(walker_params.thigh_swing_deg, 0.04);
        p.swing_flexion_deg = vary(walker_params.swing_flexion_deg, 0.04);
        p.cycle_frames = std::min(vary(walker_params.cycle_frames, 0.02),
                                  static_cast<double>(p.n_frames) / 2.0);
        p.forward_speed = vary(spec.base.forward_speed, 0.05);
        p.direction = unit(rng) < 0.0 ? WalkDirection::kNegative : WalkDirection::kPositive;
        char id[64];
        std::snprintf(id, sizeof id, "%s_%s_%03zu", walker.c_str(),
                      std::string(to_string(label)).c_str(), k);
        p.video_id = id;
        p.seed = splitmix64(spec.seed ^ splitmix64(w * 1000003ULL + static_cast<std::uint64_t>(label) * 1009ULL + k));
        out.samples.push_back(generate_sequence(p));
        out.labels.push_back(make_label_record(p.video_id, {label, label, label}));
      }
    }
  }
  return out;
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  const auto kp_dir = dir / "keypoints";
  std::error_code ec;
  std::filesystem::create_directories(kp_dir, ec);
  if (ec) throw Error("cannot create '" + kp_dir.string() + "': " + ec.message());
  for (const auto& s : data.samples) {
    write_keypoint_file((kp_dir / (s.sequence.video_id + ".json")).string(), s.sequence);
  }
  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw Error("cannot write labels.csv in '" + dir.string() + "'");
  write_labels_csv(labels, data.labels);
}

}  // namespace racewalk
