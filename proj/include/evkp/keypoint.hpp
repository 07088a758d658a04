#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace evkp {

/// Pixel location (u = column, v = row) and detection score.
struct Keypoint {
  float u = 0.0f;
  float v = 0.0f;
  float s = 0.0f;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Keypoints detected at one timestamp with unit-norm descriptor rows.
struct KeypointSet {
  std::uint64_t tau_us = 0;
  std::vector<Keypoint> keypoints;
  DescriptorMatrix descriptors;  // K x D

  std::size_t size() const { return keypoints.size(); }
  int dim() const { return static_cast<int>(descriptors.cols()); }
};

}  // namespace evkp
