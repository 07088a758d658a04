#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "evkp/event_io.hpp"
#include "evkp/keypoint.hpp"
#include "evkp/matching.hpp"
#include "evkp/relative_pose.hpp"

namespace evkp {

struct BenchConfig {
  double max_rotation_deg = 45.0;  // rotation a reference must reach within max_interval_s
  double max_interval_s = 2.0;
  int buckets = 45;                // rotation targets max_rotation_deg * {1..buckets} / buckets
  RansacConfig ransac;
  std::vector<double> auc_thresholds_deg{5.0, 10.0, 20.0};
  MatchConfig matching;

  void validate() const;
};

/// Reference/target pair whose relative rotation first reaches a bucket.
struct PoseSample {
  std::size_t ref_index = 0;
  std::size_t tgt_index = 0;
  double tau_ref = 0.0;  // seconds
  double tau_tgt = 0.0;
  Eigen::Quaterniond relative_rotation = Eigen::Quaterniond::Identity();  // q_ref^-1 * q_tgt
  double bucket_deg = 0.0;
};

/// Rotation angle of a unit quaternion, degrees in [0, 180].
double rotation_angle_deg(const Eigen::Quaterniond& q);

/// For every reference pose that reaches max_rotation_deg relative rotation
/// within max_interval_s, emits one sample per bucket: the first later pose
/// whose relative rotation reaches that bucket.
std::vector<PoseSample> select_samples(const Trajectory& trajectory, const BenchConfig& config);

/// Radial-tangential forward model on normalized coordinates.
Eigen::Vector2d distort_normalized(const Eigen::Vector2d& x, const Eigen::Vector4d& distortion);

struct UndistortedPoints {
  std::vector<Eigen::Vector2d> points;  // normalized coordinates
  std::vector<std::uint8_t> valid;      // 0 where inversion did not converge
  std::size_t dropped = 0;
};

/// Pixel -> normalized coordinates, inverting the distortion with up to 10
/// Newton iterations per point.
UndistortedPoints undistort(std::span<const Eigen::Vector2d> pixels, const CameraIntrinsics& intrinsics);

/// Supplies keypoints at trajectory timestamps. Must be safe to call from
/// several threads.
class PredictionProvider {
 public:
  virtual ~PredictionProvider() = default;
  /// nullopt when there is no prediction for this timestamp.
  virtual std::optional<KeypointSet> keypoints_at(std::uint64_t tau_us) const = 0;
};

/// SEKP files in a directory, looked up by their stored timestamp.
class DirectoryPredictionProvider : public PredictionProvider {
 public:
  explicit DirectoryPredictionProvider(const std::filesystem::path& directory);
  std::optional<KeypointSet> keypoints_at(std::uint64_t tau_us) const override;
  std::size_t size() const { return sets_.size(); }

 private:
  std::map<std::uint64_t, KeypointSet> sets_;
};

/// Trajectory time (seconds) to prediction timestamp (microseconds).
inline std::uint64_t to_microseconds(double seconds) {
  return static_cast<std::uint64_t>(std::llround(seconds * 1e6));
}

struct SampleResult {
  PoseSample sample;
  bool skipped = false;  // missing predictions
  double error_deg = 0.0;  // +inf for failed estimates
  std::size_t matches = 0;
  std::size_t inliers = 0;
};

struct BenchmarkReport {
  std::vector<SampleResult> samples;
  std::vector<std::pair<double, double>> auc;  // (threshold deg, AUC)
  std::size_t evaluated = 0;
  std::size_t failures = 0;
  std::size_t skipped = 0;
  double mean_inlier_ratio = 0.0;  // over successful estimates

  /// Errors of evaluated (non-skipped) samples, in sample order.
  std::vector<double> errors() const;
};

/// Matches, undistorts and estimates every selected sample. Per-sample RANSAC
/// seeds are derived from (seed, tau_ref, tau_tgt), so results do not depend
/// on the thread count.
BenchmarkReport run_benchmark(const Trajectory& trajectory, const PredictionProvider& provider,
                              const CameraIntrinsics& intrinsics, const BenchConfig& config, unsigned threads = 1);

std::string report_csv(const BenchmarkReport& report);
std::string report_json(const BenchmarkReport& report);
/// Cumulative error curve: one row per distinct error up to the largest threshold.
std::string curve_csv(const BenchmarkReport& report);

/// Writes samples.csv, summary.json and curve.csv into `directory`.
void write_report(const BenchmarkReport& report, const std::filesystem::path& directory);

}  // namespace evkp
