#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "evkp/event_io.hpp"
#include "evkp/keypoint.hpp"
#include "evkp/relative_pose.hpp"
#include "evkp/rng.hpp"

namespace evkp {

struct TwoViewSceneConfig {
  int points = 100;
  double min_rotation_deg = 10.0;
  double max_rotation_deg = 40.0;
  double min_baseline = 0.3;
  double max_baseline = 1.0;
  double outlier_ratio = 0.0;  // fraction of x2 replaced by uniform points
  double half_fov = 0.6;       // x1 drawn from [-half_fov, half_fov]^2
};

/// Random rigid motion X2 = R X1 + t and exact normalized projections of
/// points 2-10 units deep, all in front of both cameras.
struct TwoViewScene {
  Points2 x1, x2;
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
  std::vector<std::uint8_t> outlier;
};

TwoViewScene make_two_view_scene(Rng& rng, const TwoViewSceneConfig& config);

struct SyntheticBenchConfig {
  double duration_s = 2.5;
  double rate_hz = 10.0;
  double spin_deg_per_s = 90.0;
  Eigen::Vector3d spin_axis{0.1, 1.0, 0.2};     // camera-frame axis
  Eigen::Vector3d velocity{0.6, 0.0, 0.2};      // m/s, world frame
  int landmarks = 1500;
  double min_radius = 4.0;
  double max_radius = 8.0;
  int descriptor_dim = 64;
  int width = 640;
  int height = 480;
  CameraIntrinsics intrinsics{320.0, 320.0, 320.0, 240.0, Eigen::Vector4d(-0.05, 0.01, 0.0, 0.0)};
  std::uint64_t seed = 0;
};

/// Camera spinning inside a shell of landmarks. Every landmark carries a fixed
/// random unit descriptor, so predictions match exactly across timestamps.
struct SyntheticBench {
  Trajectory trajectory;
  CameraIntrinsics intrinsics;
  std::vector<KeypointSet> predictions;  // one per trajectory pose
};

SyntheticBench make_synthetic_bench(const SyntheticBenchConfig& config);

/// Writes trajectory.txt, intrinsics.json and predictions/<tau_us>.sekp.
void write_synthetic_bench(const SyntheticBench& bench, const std::filesystem::path& directory);

}  // namespace evkp
