#include "evkp/relative_pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "evkp/error.hpp"
#include "evkp/rng.hpp"

namespace evkp {
namespace {

constexpr std::size_t kMinimalSample = 8;

Eigen::Matrix3d normalizing_transform(std::span<const Eigen::Vector2d> x) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : x) centroid += p;
  centroid /= static_cast<double>(x.size());
  double spread = 0.0;
  for (const auto& p : x) spread += (p - centroid).norm();
  spread /= static_cast<double>(x.size());
  const double s = spread > 0.0 ? std::numbers::sqrt2 / spread : 1.0;
  Eigen::Matrix3d T;
  T << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return T;
}

Eigen::Matrix3d project_to_essential(const Eigen::Matrix3d& F) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() * svd.matrixV().transpose();
}

std::size_t score(const Eigen::Matrix3d& E, std::span<const Eigen::Vector2d> x1, std::span<const Eigen::Vector2d> x2,
                  double threshold_sq, std::vector<std::uint8_t>* mask) {
  std::size_t count = 0;
  for (std::size_t k = 0; k < x1.size(); ++k) {
    const bool in = sampson_distance(E, x1[k], x2[k]) <= threshold_sq;
    count += in;
    if (mask) (*mask)[k] = in;
  }
  return count;
}

}  // namespace

Eigen::Matrix3d essential_eight_point(std::span<const Eigen::Vector2d> x1, std::span<const Eigen::Vector2d> x2) {
  if (x1.size() != x2.size()) throw InvalidArgument("correspondence lists differ in length");
  if (x1.size() < kMinimalSample) throw InvalidArgument("8-point solver needs at least 8 correspondences");
  const Eigen::Matrix3d T1 = normalizing_transform(x1);
  const Eigen::Matrix3d T2 = normalizing_transform(x2);

  const Eigen::Index rows = std::max<Eigen::Index>(9, static_cast<Eigen::Index>(x1.size()));
  Eigen::Matrix<double, Eigen::Dynamic, 9> A = Eigen::Matrix<double, Eigen::Dynamic, 9>::Zero(rows, 9);
  for (std::size_t k = 0; k < x1.size(); ++k) {
    const Eigen::Vector3d a = T1 * x1[k].homogeneous();
    const Eigen::Vector3d b = T2 * x2[k].homogeneous();
    A.row(static_cast<Eigen::Index>(k)) << b.x() * a.x(), b.x() * a.y(), b.x() * a.z(), b.y() * a.x(),
        b.y() * a.y(), b.y() * a.z(), b.z() * a.x(), b.z() * a.y(), b.z() * a.z();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 9>> svd(A, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> e = svd.matrixV().col(8);
  const Eigen::Matrix3d En = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(e.data());
  return project_to_essential(T2.transpose() * En * T1);
}

double sampson_distance(const Eigen::Matrix3d& E, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  const Eigen::Vector3d a = x1.homogeneous();
  const Eigen::Vector3d b = x2.homogeneous();
  const Eigen::Vector3d Ea = E * a;
  const Eigen::Vector3d Etb = E.transpose() * b;
  const double r = b.dot(Ea);
  const double denom = Ea.head<2>().squaredNorm() + Etb.head<2>().squaredNorm();
  return denom > 0.0 ? r * r / denom : std::numeric_limits<double>::infinity();
}

std::array<MotionCandidate, 4> decompose_essential(const Eigen::Matrix3d& E) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Eigen::Matrix3d W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d R1 = U * W * V.transpose();
  const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2).normalized();
  return {{{R1, t}, {R1, -t}, {R2, t}, {R2, -t}}};
}

std::size_t count_in_front(const MotionCandidate& motion, std::span<const Eigen::Vector2d> x1,
                           std::span<const Eigen::Vector2d> x2, std::span<const std::uint8_t> mask) {
  std::size_t count = 0;
  for (std::size_t k = 0; k < x1.size(); ++k) {
    if (!mask.empty() && !mask[k]) continue;
    // Depths (d1, d2) minimizing |d1 R x1 + t - d2 x2|.
    Eigen::Matrix<double, 3, 2> M;
    M.col(0) = motion.R * x1[k].homogeneous();
    M.col(1) = -x2[k].homogeneous();
    const Eigen::Vector2d depth = M.colPivHouseholderQr().solve(-motion.t);
    count += depth(0) > 0.0 && depth(1) > 0.0;
  }
  return count;
}

RelativePose estimate_relative_pose(std::span<const Eigen::Vector2d> x1, std::span<const Eigen::Vector2d> x2,
                                    const RansacConfig& config, double focal_px) {
  if (x1.size() != x2.size()) throw InvalidArgument("correspondence lists differ in length");
  if (!(focal_px > 0.0) || !(config.threshold_px > 0.0) || config.iterations < 1)
    throw InvalidArgument("RANSAC needs positive focal, threshold and iteration count");
  RelativePose pose;
  const std::size_t n = x1.size();
  if (n < kMinimalSample) {
    pose.failure = "fewer than 8 matches";
    return pose;
  }
  const double threshold = config.threshold_px / focal_px;
  const double threshold_sq = threshold * threshold;

  Rng rng(config.seed);
  std::array<std::size_t, kMinimalSample> sample{};
  std::array<Eigen::Vector2d, kMinimalSample> s1, s2;
  std::size_t best_count = 0;
  Eigen::Matrix3d best_E = Eigen::Matrix3d::Zero();
  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t k = 0; k < kMinimalSample; ++k) {
      std::size_t pick;
      do {
        pick = static_cast<std::size_t>(uniform_index(rng, n));
      } while (std::find(sample.begin(), sample.begin() + k, pick) != sample.begin() + k);
      sample[k] = pick;
      s1[k] = x1[pick];
      s2[k] = x2[pick];
    }
    const Eigen::Matrix3d E = essential_eight_point(s1, s2);
    const std::size_t count = score(E, x1, x2, threshold_sq, nullptr);
    if (count > best_count) {
      best_count = count;
      best_E = E;
    }
  }
  if (best_count < kMinimalSample) {
    pose.failure = "fewer than 8 inliers";
    return pose;
  }

  std::vector<std::uint8_t> mask(n, 0);
  score(best_E, x1, x2, threshold_sq, &mask);
  Points2 in1, in2;
  for (std::size_t k = 0; k < n; ++k)
    if (mask[k]) {
      in1.push_back(x1[k]);
      in2.push_back(x2[k]);
    }
  const Eigen::Matrix3d refined = essential_eight_point(in1, in2);
  std::vector<std::uint8_t> refined_mask(n, 0);
  if (score(refined, x1, x2, threshold_sq, &refined_mask) >= best_count) {
    best_E = refined;
    mask = std::move(refined_mask);
  }

  const auto candidates = decompose_essential(best_E);
  std::size_t best_front = 0;
  std::size_t chosen = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::size_t front = count_in_front(candidates[c], x1, x2, mask);
    if (front > best_front) {
      best_front = front;
      chosen = c;
    }
  }
  pose.success = true;
  pose.E = best_E;
  pose.R = candidates[chosen].R;
  pose.t = candidates[chosen].t;
  pose.inlier_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  pose.inliers = std::move(mask);
  return pose;
}

double rotation_error_deg(const Eigen::Matrix3d& R_est, const Eigen::Matrix3d& R_gt) {
  for (const Eigen::Matrix3d* R : {&R_est, &R_gt}) {
    if (!R->allFinite() || ((R->transpose() * *R) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(R->determinant() - 1.0) > 1e-6)
      throw InvalidArgument("rotation_error: input is not a proper rotation matrix");
  }
  const double c = std::clamp(((R_gt.transpose() * R_est).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double auc(std::span<const double> errors_deg, double threshold_deg) {
  if (!(threshold_deg > 0.0)) throw InvalidArgument("AUC threshold must be positive");
  if (errors_deg.empty()) return 0.0;
  double area = 0.0;
  for (double e : errors_deg)
    if (std::isfinite(e) && e <= threshold_deg) area += threshold_deg - std::max(e, 0.0);
  return area / (static_cast<double>(errors_deg.size()) * threshold_deg);
}

}  // namespace evkp
