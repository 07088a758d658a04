#pragma once

#include <variant>
#include <vector>

#include "evkp/grid.hpp"
#include "evkp/keypoint.hpp"
#include "evkp/representation.hpp"

namespace evkp {

/// Softmax over each cell's 65 logits; the 64 pixel-bin probabilities fill the
/// cell's 8x8 block (bin k -> row k / 8, col k % 8) and the dustbin is dropped.
ImageF decode_cells(const CellScores<float>& cells);

/// Pixels strictly greater than every other in-bounds pixel of their
/// (2 * radius + 1)^2 neighborhood, in row-major order. The heatmap must be
/// finite; radius must be >= 1.
std::vector<Keypoint> nms_local_maxima(const ImageF& heatmap, int radius);

struct ScoreThreshold {
  float min_score = 0.01f;
};

struct TopK {
  std::size_t count = 1;
};

using DetectMode = std::variant<ScoreThreshold, TopK>;

struct DetectionConfig {
  int nms_radius = 2;
  DetectMode mode = ScoreThreshold{};
};

/// NMS followed by score filtering. Threshold mode keeps candidates with
/// s >= min_score in row-major order; top-k mode keeps the k best ordered by
/// (score desc, v asc, u asc).
std::vector<Keypoint> detect(const ImageF& heatmap, int radius, const DetectMode& mode);

inline std::vector<Keypoint> detect(const ImageF& heatmap, const DetectionConfig& config) {
  return detect(heatmap, config.nms_radius, config.mode);
}

}  // namespace evkp
