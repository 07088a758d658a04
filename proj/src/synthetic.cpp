#include "evkp/synthetic.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "evkp/matching.hpp"
#include "evkp/posebench.hpp"

namespace evkp {
namespace fs = std::filesystem;

namespace {

Eigen::Vector3d random_unit(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = {standard_normal(rng), standard_normal(rng), standard_normal(rng)};
  } while (v.norm() < 1e-9);
  return v.normalized();
}

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

TwoViewScene make_two_view_scene(Rng& rng, const TwoViewSceneConfig& config) {
  TwoViewScene scene;
  const double angle = uniform_real(rng, config.min_rotation_deg, config.max_rotation_deg) * kDeg;
  scene.R = Eigen::AngleAxisd(angle, random_unit(rng)).toRotationMatrix();
  scene.t = random_unit(rng) * uniform_real(rng, config.min_baseline, config.max_baseline);
  while (static_cast<int>(scene.x1.size()) < config.points) {
    const Eigen::Vector2d x(uniform_real(rng, -config.half_fov, config.half_fov),
                            uniform_real(rng, -config.half_fov, config.half_fov));
    const double depth = uniform_real(rng, 2.0, 10.0);
    const Eigen::Vector3d X2 = scene.R * (x.homogeneous().eval() * depth) + scene.t;
    if (X2.z() < 0.5) continue;
    scene.x1.push_back(x);
    scene.x2.push_back(X2.hnormalized());
    scene.outlier.push_back(0);
  }
  const int outliers = static_cast<int>(std::lround(config.outlier_ratio * config.points));
  for (int k = 0; k < outliers; ++k) {
    std::size_t idx;
    do {
      idx = static_cast<std::size_t>(uniform_index(rng, scene.x1.size()));
    } while (scene.outlier[idx]);
    scene.outlier[idx] = 1;
    scene.x2[idx] = {uniform_real(rng, -1.0, 1.0), uniform_real(rng, -1.0, 1.0)};
  }
  return scene;
}

SyntheticBench make_synthetic_bench(const SyntheticBenchConfig& config) {
  Rng rng(config.seed);
  std::vector<Eigen::Vector3d> landmarks;
  DescriptorMatrix descriptors(config.landmarks, config.descriptor_dim);
  for (int k = 0; k < config.landmarks; ++k) {
    landmarks.push_back(random_unit(rng) * uniform_real(rng, config.min_radius, config.max_radius));
    for (int d = 0; d < config.descriptor_dim; ++d) descriptors(k, d) = static_cast<float>(standard_normal(rng));
    descriptors.row(k).normalize();
  }

  SyntheticBench bench;
  bench.intrinsics = config.intrinsics;
  const CameraIntrinsics& K = config.intrinsics;
  const int poses = static_cast<int>(std::floor(config.duration_s * config.rate_hz)) + 1;
  const Eigen::Vector3d axis = config.spin_axis.normalized();
  for (int i = 0; i < poses; ++i) {
    const double t = i / config.rate_hz;
    PoseStamped pose;
    pose.t = t;
    pose.position = config.velocity * t;
    pose.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(config.spin_deg_per_s * t * kDeg, axis));
    bench.trajectory.push_back(pose);

    KeypointSet set;
    set.tau_us = to_microseconds(t);
    std::vector<int> visible;
    const Eigen::Matrix3d R_cw = pose.orientation.conjugate().toRotationMatrix();
    for (int k = 0; k < config.landmarks; ++k) {
      const Eigen::Vector3d Xc = R_cw * (landmarks[k] - pose.position);
      if (Xc.z() < 0.5) continue;
      const Eigen::Vector2d xn = Xc.hnormalized();
      if (xn.cwiseAbs().maxCoeff() > 1.2) continue;
      const Eigen::Vector2d xd = distort_normalized(xn, K.distortion);
      const double u = K.fx * xd.x() + K.cx, v = K.fy * xd.y() + K.cy;
      if (u < 0.0 || v < 0.0 || u >= config.width || v >= config.height) continue;
      set.keypoints.push_back({static_cast<float>(u), static_cast<float>(v), 1.0f});
      visible.push_back(k);
    }
    set.descriptors.resize(static_cast<Eigen::Index>(visible.size()), config.descriptor_dim);
    for (std::size_t r = 0; r < visible.size(); ++r)
      set.descriptors.row(static_cast<Eigen::Index>(r)) = descriptors.row(visible[r]);
    bench.predictions.push_back(std::move(set));
  }
  return bench;
}

void write_synthetic_bench(const SyntheticBench& bench, const fs::path& directory) {
  fs::create_directories(directory / "predictions");
  write_trajectory(bench.trajectory, directory / "trajectory.txt");
  write_intrinsics(bench.intrinsics, directory / "intrinsics.json");
  for (const KeypointSet& set : bench.predictions)
    write_keypoints(set, directory / "predictions" / (std::to_string(set.tau_us) + ".sekp"));
}

}  // namespace evkp
