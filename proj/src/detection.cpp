#include "evkp/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evkp {

ImageF decode_cells(const CellScores<float>& cells) {
  if (cells.channels() != kDetectorChannels)
    throw InvalidArgument("detector output must have 65 channels per cell, got " +
                          std::to_string(cells.channels()));
  ImageF heatmap(cells.rows * kCellSize, cells.cols * kCellSize);
  Eigen::Matrix<float, 1, kDetectorChannels> prob;
  for (int r = 0; r < cells.rows; ++r) {
    for (int c = 0; c < cells.cols; ++c) {
      const auto logits = cells.cell(r, c);
      const float top = logits.maxCoeff();
      if (std::isinf(top) && top > 0) {
        // Mass is shared evenly among the +inf logits.
        prob = (logits.array() == top).cast<float>();
      } else {
        prob = (logits.array() - top).exp();
      }
      prob /= prob.sum();
      for (int k = 0; k < kDustbin; ++k)
        heatmap(r * kCellSize + k / kCellSize, c * kCellSize + k % kCellSize) = prob[k];
    }
  }
  return heatmap;
}

std::vector<Keypoint> nms_local_maxima(const ImageF& heatmap, int radius) {
  if (radius < 1) throw InvalidArgument("NMS radius must be >= 1");
  const int h = static_cast<int>(heatmap.rows());
  const int w = static_cast<int>(heatmap.cols());

  // Separable max filter; out-of-bounds pixels never block a maximum.
  ImageF row_max(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      row_max(y, x) = heatmap.row(y).segment(x0, x1 - x0 + 1).maxCoeff();
    }

  std::vector<Keypoint> maxima;
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      const float s = heatmap(y, x);
      if (s < row_max.col(x).segment(y0, y1 - y0 + 1).maxCoeff()) continue;
      // s equals the window max; reject plateaus (another pixel with equal value).
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      bool unique = true;
      for (int yy = y0; yy <= y1 && unique; ++yy)
        for (int xx = x0; xx <= x1; ++xx)
          if ((yy != y || xx != x) && heatmap(yy, xx) == s) {
            unique = false;
            break;
          }
      if (unique) maxima.push_back({static_cast<float>(x), static_cast<float>(y), s});
    }
  }
  return maxima;
}

std::vector<Keypoint> detect(const ImageF& heatmap, int radius, const DetectMode& mode) {
  std::vector<Keypoint> candidates = nms_local_maxima(heatmap, radius);
  if (const auto* threshold = std::get_if<ScoreThreshold>(&mode)) {
    if (!(threshold->min_score >= 0.0f && threshold->min_score <= 1.0f))
      throw InvalidArgument("score threshold must lie in [0, 1]");
    std::erase_if(candidates, [&](const Keypoint& k) { return !(k.s >= threshold->min_score); });
    return candidates;
  }
  const std::size_t k = std::get<TopK>(mode).count;
  if (k < 1) throw InvalidArgument("top-k count must be >= 1");
  const auto better = [](const Keypoint& a, const Keypoint& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.v != b.v) return a.v < b.v;
    return a.u < b.u;
  };
  const std::size_t keep = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), better);
  candidates.resize(keep);
  return candidates;
}

}  // namespace evkp
