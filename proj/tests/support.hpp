#pragma once

#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "racewalk/error.hpp"
#include "racewalk/pose_data.hpp"

namespace rwtest {

// Fails unless `stmt` throws racewalk::Error whose message contains `tag`.
#define EXPECT_RW_ERROR(stmt, tag)                                                   \
  do {                                                                               \
    try {                                                                            \
      (void)(stmt);                                                                  \
      ADD_FAILURE() << "expected racewalk::Error containing \"" << (tag) << "\"";    \
    } catch (const racewalk::Error& e) {                                             \
      EXPECT_NE(std::string(e.what()).find(tag), std::string::npos) << e.what();     \
    }                                                                                \
  } while (0)

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("racewalk_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// A plausible standing pose in image pixels, walker facing +x.
inline racewalk::Pose upright_pose(double x0 = 100.0, double y0 = 50.0, double scale = 100.0) {
  using racewalk::KeypointName;
  racewalk::Pose p;
  const auto set = [&](KeypointName k, double dx, double dy) {
    p[k] = {x0 + scale * dx, y0 + scale * dy, 0.9};
  };
  set(KeypointName::kNose, 0.0, 0.0);
  set(KeypointName::kLeftEye, 0.02, -0.03);
  set(KeypointName::kRightEye, 0.03, -0.03);
  set(KeypointName::kLeftEar, -0.04, -0.02);
  set(KeypointName::kRightEar, -0.03, -0.02);
  set(KeypointName::kLeftShoulder, -0.05, 0.25);
  set(KeypointName::kRightShoulder, 0.05, 0.25);
  set(KeypointName::kLeftElbow, -0.1, 0.5);
  set(KeypointName::kRightElbow, 0.1, 0.5);
  set(KeypointName::kLeftWrist, -0.05, 0.75);
  set(KeypointName::kRightWrist, 0.15, 0.7);
  set(KeypointName::kLeftHip, -0.05, 1.0);
  set(KeypointName::kRightHip, 0.05, 1.0);
  set(KeypointName::kLeftKnee, -0.1, 1.5);
  set(KeypointName::kRightKnee, 0.2, 1.45);
  set(KeypointName::kLeftAnkle, -0.25, 1.95);
  set(KeypointName::kRightAnkle, 0.3, 2.0);
  return p;
}

inline racewalk::Pose random_pose(std::mt19937_64& rng) {
  racewalk::Pose p;
  for (auto& kp : p.keypoints) kp = {uniform(rng, 0.0, 640.0), uniform(rng, 0.0, 480.0), 1.0};
  return p;
}

}  // namespace rwtest
