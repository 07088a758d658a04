#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace evkp {

/// Correspondences in normalized image coordinates; x2^T E x1 = 0 for the
/// motion X2 = R X1 + t.
using Points2 = std::vector<Eigen::Vector2d>;

/// Least-squares 8-point essential matrix (Hartley-normalized), projected onto
/// the essential manifold (singular values 1, 1, 0). Needs >= 8 points.
Eigen::Matrix3d essential_eight_point(std::span<const Eigen::Vector2d> x1, std::span<const Eigen::Vector2d> x2);

/// Squared Sampson distance of a correspondence, in normalized units.
double sampson_distance(const Eigen::Matrix3d& E, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2);

struct MotionCandidate {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
};

/// The four (R, t) factorizations of an essential matrix, with unit t.
std::array<MotionCandidate, 4> decompose_essential(const Eigen::Matrix3d& E);

/// Number of correspondences triangulated in front of both cameras.
std::size_t count_in_front(const MotionCandidate& motion, std::span<const Eigen::Vector2d> x1,
                           std::span<const Eigen::Vector2d> x2, std::span<const std::uint8_t> mask = {});

struct RansacConfig {
  int iterations = 2000;
  double threshold_px = 1.0;
  std::uint64_t seed = 0;
};

struct RelativePose {
  bool success = false;
  std::string failure;  // reason when !success
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
};

/// RANSAC over minimal 8-point hypotheses scored by Sampson distance against
/// threshold_px / focal_px, refit on the inliers, then chirality selection.
/// Fails (success = false) with fewer than 8 matches or 8 inliers.
RelativePose estimate_relative_pose(std::span<const Eigen::Vector2d> x1, std::span<const Eigen::Vector2d> x2,
                                    const RansacConfig& config, double focal_px);

/// Angle of R_gt^T R_est in degrees. Throws if either is not a proper rotation
/// within 1e-6.
double rotation_error_deg(const Eigen::Matrix3d& R_est, const Eigen::Matrix3d& R_gt);

/// Normalized area under the cumulative error curve on [0, threshold]:
/// sum over errors e <= threshold of (threshold - e), over n * threshold.
/// Non-finite errors count as failures.
double auc(std::span<const double> errors_deg, double threshold_deg);

}  // namespace evkp
