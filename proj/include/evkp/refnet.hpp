#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "evkp/detection.hpp"
#include "evkp/grid.hpp"
#include "evkp/posebench.hpp"
#include "evkp/representation.hpp"

namespace evkp {

/// Network output at one timestamp: 65-channel detector logits and raw
/// (unnormalized) grid descriptors, both on the 8-pixel cell grid.
struct Prediction {
  CellScores<float> cells;
  DescriptorGrid<float> descriptors;
};

/// Tiny fixed-weight convolutional network with the real output geometry:
/// 3x3 conv (2N -> 8) + ReLU, 8x8 max pool, 3x3 conv (8 -> 16) + ReLU, then
/// 1x1 detector (16 -> 65) and descriptor (16 -> D) heads. Convolutions use
/// edge-replicate padding, so constant inputs give constant outputs.
/// Only useful for shape, decode and plumbing tests.
class RefNet {
 public:
  static constexpr int kHidden1 = 8;
  static constexpr int kHidden2 = 16;
  /// Cells within this distance of a crop border may differ from the full image.
  static constexpr int kReceptiveMarginCells = 2;

  RefNet(int input_channels, std::uint64_t seed = 0, int descriptor_dim = kDefaultDescriptorDim);

  /// Throws InvalidArgument unless height and width are multiples of 8 and
  /// the channel count matches.
  Prediction forward(const Mcts& mcts) const;
  Prediction forward(const std::vector<ImageF>& channels) const;

  int input_channels() const { return input_channels_; }
  int descriptor_dim() const { return descriptor_dim_; }

 private:
  int input_channels_;
  int descriptor_dim_;
  std::vector<float> conv1_w_, conv1_b_;  // [out][in][3][3]
  std::vector<float> conv2_w_, conv2_b_;
  Eigen::MatrixXf det_w_, desc_w_;  // [out x hidden2]
  Eigen::VectorXf det_b_, desc_b_;
};

/// Runs a RefNet over MCTS tensors and decodes keypoints with descriptors.
class RefNetPredictionProvider : public PredictionProvider {
 public:
  /// MCTS containers (*.mcts) from a directory, keyed by their timestamp.
  RefNetPredictionProvider(const std::filesystem::path& mcts_directory, const DetectionConfig& detection,
                           std::uint64_t seed = 0);
  /// MCTS built on demand from an event stream.
  RefNetPredictionProvider(EventStream events, TimeWindowSet windows, const DetectionConfig& detection,
                           std::uint64_t seed = 0);

  std::optional<KeypointSet> keypoints_at(std::uint64_t tau_us) const override;

 private:
  std::optional<Mcts> mcts_at(std::uint64_t tau_us) const;

  DetectionConfig detection_;
  std::map<std::uint64_t, std::filesystem::path> files_;
  std::optional<EventStream> events_;
  TimeWindowSet windows_;
  std::uint64_t seed_;
};

/// Largest multiple-of-8 crop anchored at the top-left corner.
Mcts crop_to_cells(const Mcts& mcts);

}  // namespace evkp
