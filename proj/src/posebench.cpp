#include "evkp/posebench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"
#include "evkp/parallel.hpp"
#include "evkp/rng.hpp"

namespace evkp {
namespace fs = std::filesystem;

namespace {

// Rotation angles reached exactly (e.g. 45 degrees at a sample) may come out
// of the quaternion arithmetic a few ulps short.
constexpr double kAngleSlackDeg = 1e-9;
constexpr int kUndistortIterations = 10;
constexpr double kUndistortTolerance = 1e-12;

std::string format_double(const char* fmt, double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

void BenchConfig::validate() const {
  if (!(max_rotation_deg > 0.0 && max_rotation_deg <= 180.0))
    throw InvalidArgument("max rotation must lie in (0, 180] degrees");
  if (!(max_interval_s > 0.0)) throw InvalidArgument("max interval must be positive");
  if (buckets < 1) throw InvalidArgument("bucket count must be >= 1");
  if (auc_thresholds_deg.empty()) throw InvalidArgument("at least one AUC threshold is required");
  for (std::size_t i = 0; i < auc_thresholds_deg.size(); ++i) {
    if (!(auc_thresholds_deg[i] > 0.0)) throw InvalidArgument("AUC thresholds must be positive");
    if (i > 0 && !(auc_thresholds_deg[i] > auc_thresholds_deg[i - 1]))
      throw InvalidArgument("AUC thresholds must be ascending");
  }
  if (ransac.iterations < 1 || !(ransac.threshold_px > 0.0))
    throw InvalidArgument("RANSAC needs positive iterations and threshold");
}

double rotation_angle_deg(const Eigen::Quaterniond& q) {
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w())) * 180.0 / std::numbers::pi;
}

std::vector<PoseSample> select_samples(const Trajectory& trajectory, const BenchConfig& config) {
  config.validate();
  std::vector<PoseSample> samples;
  const std::size_t n = trajectory.size();
  std::vector<double> angle;
  for (std::size_t ref = 0; ref < n; ++ref) {
    const Eigen::Quaterniond q_ref_inv = trajectory[ref].orientation.conjugate();
    angle.clear();
    bool reached = false;
    for (std::size_t k = ref + 1; k < n && trajectory[k].t - trajectory[ref].t <= config.max_interval_s; ++k) {
      angle.push_back(rotation_angle_deg(q_ref_inv * trajectory[k].orientation));
      if (angle.back() + kAngleSlackDeg >= config.max_rotation_deg) {
        reached = true;
        break;
      }
    }
    if (!reached) continue;
    std::size_t k = 0;
    for (int m = 1; m <= config.buckets; ++m) {
      const double bucket = config.max_rotation_deg * m / config.buckets;
      while (angle[k] + kAngleSlackDeg < bucket) ++k;
      const std::size_t tgt = ref + 1 + k;
      samples.push_back({ref, tgt, trajectory[ref].t, trajectory[tgt].t,
                         (q_ref_inv * trajectory[tgt].orientation).normalized(), bucket});
    }
  }
  return samples;
}

Eigen::Vector2d distort_normalized(const Eigen::Vector2d& x, const Eigen::Vector4d& d) {
  const double k1 = d[0], k2 = d[1], p1 = d[2], p2 = d[3];
  const double r2 = x.squaredNorm();
  const double radial = 1.0 + k1 * r2 + k2 * r2 * r2;
  return {x.x() * radial + 2.0 * p1 * x.x() * x.y() + p2 * (r2 + 2.0 * x.x() * x.x()),
          x.y() * radial + p1 * (r2 + 2.0 * x.y() * x.y()) + 2.0 * p2 * x.x() * x.y()};
}

UndistortedPoints undistort(std::span<const Eigen::Vector2d> pixels, const CameraIntrinsics& k) {
  UndistortedPoints out;
  out.points.reserve(pixels.size());
  out.valid.reserve(pixels.size());
  const Eigen::Vector4d& d = k.distortion;
  const bool pinhole = d.isZero(0.0);
  for (const Eigen::Vector2d& px : pixels) {
    const Eigen::Vector2d target((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy);
    if (pinhole) {
      out.points.push_back(target);
      out.valid.push_back(1);
      continue;
    }
    Eigen::Vector2d x = target;
    bool converged = false;
    for (int it = 0; it < kUndistortIterations; ++it) {
      const Eigen::Vector2d residual = distort_normalized(x, d) - target;
      if (!residual.allFinite()) break;
      if (residual.norm() <= kUndistortTolerance) {
        converged = true;
        break;
      }
      const double r2 = x.squaredNorm();
      const double radial = 1.0 + d[0] * r2 + d[1] * r2 * r2;
      const double dr = d[0] + 2.0 * d[1] * r2;  // d(radial)/d(r2)
      Eigen::Matrix2d J;
      J(0, 0) = radial + 2.0 * x.x() * x.x() * dr + 2.0 * d[2] * x.y() + 6.0 * d[3] * x.x();
      J(0, 1) = 2.0 * x.x() * x.y() * dr + 2.0 * d[2] * x.x() + 2.0 * d[3] * x.y();
      J(1, 0) = 2.0 * x.x() * x.y() * dr + 2.0 * d[2] * x.x() + 2.0 * d[3] * x.y();
      J(1, 1) = radial + 2.0 * x.y() * x.y() * dr + 6.0 * d[2] * x.y() + 2.0 * d[3] * x.x();
      x -= J.partialPivLu().solve(residual);
    }
    if (!converged) {
      const Eigen::Vector2d residual = distort_normalized(x, d) - target;
      converged = residual.allFinite() && residual.norm() <= kUndistortTolerance;
    }
    out.points.push_back(x);
    out.valid.push_back(converged);
    out.dropped += !converged;
  }
  return out;
}

DirectoryPredictionProvider::DirectoryPredictionProvider(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw IoError(directory.string() + " is not a directory");
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".sekp") continue;
    KeypointSet set = read_keypoints(entry.path());
    const std::uint64_t tau = set.tau_us;
    if (!sets_.emplace(tau, std::move(set)).second)
      throw FormatError(directory.string() + ": duplicate prediction timestamp " + std::to_string(tau));
  }
}

std::optional<KeypointSet> DirectoryPredictionProvider::keypoints_at(std::uint64_t tau_us) const {
  const auto it = sets_.find(tau_us);
  if (it == sets_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> BenchmarkReport::errors() const {
  std::vector<double> e;
  for (const SampleResult& r : samples)
    if (!r.skipped) e.push_back(r.error_deg);
  return e;
}

BenchmarkReport run_benchmark(const Trajectory& trajectory, const PredictionProvider& provider,
                              const CameraIntrinsics& intrinsics, const BenchConfig& config, unsigned threads) {
  const std::vector<PoseSample> samples = select_samples(trajectory, config);

  std::vector<std::size_t> needed;
  for (const PoseSample& s : samples) {
    needed.push_back(s.ref_index);
    needed.push_back(s.tgt_index);
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  std::vector<std::optional<KeypointSet>> predictions(trajectory.size());
  parallel_for(needed.size(), threads, [&](std::size_t k) {
    const std::size_t idx = needed[k];
    predictions[idx] = provider.keypoints_at(to_microseconds(trajectory[idx].t));
  });

  const double focal = std::sqrt(intrinsics.fx * intrinsics.fy);
  BenchmarkReport report;
  report.samples.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t k) {
    const PoseSample& s = samples[k];
    SampleResult& result = report.samples[k];
    result.sample = s;
    const auto& a = predictions[s.ref_index];
    const auto& b = predictions[s.tgt_index];
    if (!a || !b) {
      result.skipped = true;
      result.error_deg = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    const MatchSet matches = match_descriptors(*a, *b, config.matching);
    std::vector<Eigen::Vector2d> pa, pb;
    for (const Match& m : matches.pairs) {
      pa.emplace_back(a->keypoints[m.i].u, a->keypoints[m.i].v);
      pb.emplace_back(b->keypoints[m.j].u, b->keypoints[m.j].v);
    }
    const UndistortedPoints ua = undistort(pa, intrinsics);
    const UndistortedPoints ub = undistort(pb, intrinsics);
    Points2 x1, x2;
    for (std::size_t m = 0; m < pa.size(); ++m)
      if (ua.valid[m] && ub.valid[m]) {
        x1.push_back(ua.points[m]);
        x2.push_back(ub.points[m]);
      }
    result.matches = x1.size();

    RansacConfig ransac = config.ransac;
    ransac.seed = hash_combine(hash_combine(config.ransac.seed, to_microseconds(s.tau_ref)), to_microseconds(s.tau_tgt));
    const RelativePose pose = estimate_relative_pose(x1, x2, ransac, focal);
    if (!pose.success) {
      result.error_deg = std::numeric_limits<double>::infinity();
      return;
    }
    result.inliers = pose.inlier_count;
    const Eigen::Matrix3d R_gt = s.relative_rotation.conjugate().toRotationMatrix();
    result.error_deg = rotation_error_deg(pose.R, R_gt);
  });

  double ratio_sum = 0.0;
  std::size_t successes = 0;
  for (const SampleResult& r : report.samples) {
    if (r.skipped) {
      ++report.skipped;
      continue;
    }
    ++report.evaluated;
    if (!std::isfinite(r.error_deg)) {
      ++report.failures;
    } else {
      ratio_sum += static_cast<double>(r.inliers) / static_cast<double>(r.matches);
      ++successes;
    }
  }
  report.mean_inlier_ratio = successes ? ratio_sum / static_cast<double>(successes) : 0.0;
  const std::vector<double> errors = report.errors();
  for (double th : config.auc_thresholds_deg) report.auc.emplace_back(th, auc(errors, th));
  return report;
}

std::string report_csv(const BenchmarkReport& report) {
  std::string out = "tau_ref,tau_tgt,bucket_deg,error_deg,inliers,matches\n";
  for (const SampleResult& r : report.samples) {
    out += format_double("%.6f", r.sample.tau_ref) + "," + format_double("%.6f", r.sample.tau_tgt) + "," +
           format_double("%.4f", r.sample.bucket_deg) + "," + format_double("%.9f", r.error_deg) + "," +
           std::to_string(r.inliers) + "," + std::to_string(r.matches) + "\n";
  }
  return out;
}

std::string report_json(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json table = nlohmann::ordered_json::object();
  for (const auto& [th, value] : report.auc) table["auc@" + format_double("%g", th)] = value;
  j["auc"] = table;
  j["samples"] = report.samples.size();
  j["evaluated"] = report.evaluated;
  j["failures"] = report.failures;
  j["skipped"] = report.skipped;
  j["mean_inlier_ratio"] = report.mean_inlier_ratio;
  return j.dump(2) + "\n";
}

std::string curve_csv(const BenchmarkReport& report) {
  std::vector<double> errors = report.errors();
  const double n = static_cast<double>(errors.size());
  const double limit = report.auc.empty() ? std::numeric_limits<double>::infinity() : report.auc.back().first;
  std::sort(errors.begin(), errors.end());
  std::string out = "error_deg,recall\n0.000000000," + format_double("%.9f", 0.0) + "\n";
  for (std::size_t k = 0; k < errors.size() && errors[k] <= limit; ++k)
    out += format_double("%.9f", errors[k]) + "," + format_double("%.9f", static_cast<double>(k + 1) / n) + "\n";
  return out;
}

void write_report(const BenchmarkReport& report, const fs::path& directory) {
  fs::create_directories(directory);
  write_file_text(directory / "samples.csv", report_csv(report));
  write_file_text(directory / "summary.json", report_json(report));
  write_file_text(directory / "curve.csv", curve_csv(report));
}

}  // namespace evkp
