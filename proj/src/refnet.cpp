#include "evkp/refnet.hpp"

#include <algorithm>
#include <cmath>

#include "evkp/error.hpp"
#include "evkp/matching.hpp"
#include "evkp/rng.hpp"

namespace evkp {
namespace fs = std::filesystem;

namespace {

std::vector<float> draw(Rng& rng, std::size_t n, double scale) {
  std::vector<float> w(n);
  for (float& v : w) v = static_cast<float>(uniform_real(rng, -scale, scale));
  return w;
}

ImageF pad_replicate(const ImageF& in) {
  const Eigen::Index h = in.rows(), w = in.cols();
  ImageF out(h + 2, w + 2);
  out.block(1, 1, h, w) = in;
  out.block(1, 0, h, 1) = in.col(0);
  out.block(1, w + 1, h, 1) = in.col(w - 1);
  out.row(0) = out.row(1);
  out.row(h + 1) = out.row(h);
  return out;
}

/// 3x3 convolution with replicate padding followed by ReLU.
std::vector<ImageF> conv3x3_relu(const std::vector<ImageF>& in, const std::vector<float>& weights,
                                 const std::vector<float>& bias, int out_channels) {
  const Eigen::Index h = in.front().rows(), w = in.front().cols();
  std::vector<ImageF> padded;
  padded.reserve(in.size());
  for (const ImageF& c : in) padded.push_back(pad_replicate(c));
  std::vector<ImageF> out;
  out.reserve(out_channels);
  const std::size_t in_channels = in.size();
  for (int o = 0; o < out_channels; ++o) {
    ImageF acc = ImageF::Constant(h, w, bias[o]);
    for (std::size_t c = 0; c < in_channels; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const float wt = weights[((o * in_channels + c) * 3 + ky) * 3 + kx];
          acc.array() += wt * padded[c].block(ky, kx, h, w).array();
        }
    out.push_back(acc.cwiseMax(0.0f));
  }
  return out;
}

}  // namespace

RefNet::RefNet(int input_channels, std::uint64_t seed, int descriptor_dim)
    : input_channels_(input_channels), descriptor_dim_(descriptor_dim) {
  if (input_channels < 1 || descriptor_dim < 1) throw InvalidArgument("RefNet needs positive channel counts");
  Rng rng(hash_combine(seed, 0x5265664e6574ULL));
  const double s1 = 1.0 / std::sqrt(9.0 * input_channels);
  conv1_w_ = draw(rng, static_cast<std::size_t>(kHidden1) * input_channels * 9, s1);
  conv1_b_ = draw(rng, kHidden1, 0.1);
  const double s2 = 1.0 / std::sqrt(9.0 * kHidden1);
  conv2_w_ = draw(rng, static_cast<std::size_t>(kHidden2) * kHidden1 * 9, s2);
  conv2_b_ = draw(rng, kHidden2, 0.1);
  const double s3 = 1.0 / std::sqrt(static_cast<double>(kHidden2));
  const auto dense = [&](int rows, int cols, double scale) {
    const std::vector<float> v = draw(rng, static_cast<std::size_t>(rows) * cols, scale);
    return Eigen::MatrixXf(Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), rows, cols));
  };
  det_w_ = dense(kDetectorChannels, kHidden2, s3);
  det_b_ = dense(kDetectorChannels, 1, 0.1);
  desc_w_ = dense(descriptor_dim, kHidden2, s3);
  desc_b_ = dense(descriptor_dim, 1, 0.1);
}

Prediction RefNet::forward(const Mcts& mcts) const { return forward(mcts.channels); }

Prediction RefNet::forward(const std::vector<ImageF>& channels) const {
  if (static_cast<int>(channels.size()) != input_channels_)
    throw InvalidArgument("RefNet expects " + std::to_string(input_channels_) + " input channels, got " +
                          std::to_string(channels.size()));
  const Eigen::Index h = channels.front().rows(), w = channels.front().cols();
  for (const ImageF& c : channels)
    if (c.rows() != h || c.cols() != w) throw InvalidArgument("RefNet input channels differ in shape");
  if (h == 0 || w == 0 || h % kCellSize != 0 || w % kCellSize != 0)
    throw InvalidArgument("RefNet input " + std::to_string(h) + "x" + std::to_string(w) +
                          " must be a positive multiple of 8 (crop first)");
  const int rows = static_cast<int>(h / kCellSize), cols = static_cast<int>(w / kCellSize);

  const std::vector<ImageF> hidden1 = conv3x3_relu(channels, conv1_w_, conv1_b_, kHidden1);
  std::vector<ImageF> pooled;
  for (const ImageF& c : hidden1) {
    ImageF p(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int q = 0; q < cols; ++q) p(r, q) = c.block(r * kCellSize, q * kCellSize, kCellSize, kCellSize).maxCoeff();
    pooled.push_back(std::move(p));
  }
  const std::vector<ImageF> hidden2 = conv3x3_relu(pooled, conv2_w_, conv2_b_, kHidden2);

  Prediction out{CellScores<float>(rows, cols, kDetectorChannels), DescriptorGrid<float>(rows, cols, descriptor_dim_)};
  Eigen::VectorXf feature(kHidden2);
  for (int r = 0; r < rows; ++r)
    for (int q = 0; q < cols; ++q) {
      for (int k = 0; k < kHidden2; ++k) feature[k] = hidden2[k](r, q);
      out.cells.cell(r, q) = (det_w_ * feature + det_b_).transpose();
      out.descriptors.cell(r, q) = (desc_w_ * feature + desc_b_).transpose();
    }
  return out;
}

Mcts crop_to_cells(const Mcts& mcts) {
  const int w = mcts.width / kCellSize * kCellSize, h = mcts.height / kCellSize * kCellSize;
  if (w == mcts.width && h == mcts.height) return mcts;
  Mcts out{w, h, mcts.windows, mcts.tau_us, {}};
  for (const ImageF& c : mcts.channels) out.channels.push_back(c.topLeftCorner(h, w));
  return out;
}

RefNetPredictionProvider::RefNetPredictionProvider(const fs::path& mcts_directory, const DetectionConfig& detection,
                                                   std::uint64_t seed)
    : detection_(detection), seed_(seed) {
  if (!fs::is_directory(mcts_directory)) throw IoError(mcts_directory.string() + " is not a directory");
  for (const auto& entry : fs::directory_iterator(mcts_directory)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".mcts") continue;
    const Mcts m = read_mcts(entry.path());
    if (!files_.emplace(m.tau_us, entry.path()).second)
      throw FormatError(mcts_directory.string() + ": duplicate MCTS timestamp " + std::to_string(m.tau_us));
  }
}

RefNetPredictionProvider::RefNetPredictionProvider(EventStream events, TimeWindowSet windows,
                                                   const DetectionConfig& detection, std::uint64_t seed)
    : detection_(detection), events_(std::move(events)), windows_(std::move(windows)), seed_(seed) {
  validate(*events_);
}

std::optional<Mcts> RefNetPredictionProvider::mcts_at(std::uint64_t tau_us) const {
  if (events_) {
    ActiveEventSurface surface(events_->width, events_->height);
    for (const Event& e : events_->events) {
      if (e.t > tau_us) break;
      surface.ingest(e);
    }
    return mcts_from_aes(surface, tau_us, windows_);
  }
  const auto it = files_.find(tau_us);
  if (it == files_.end()) return std::nullopt;
  return read_mcts(it->second);
}

std::optional<KeypointSet> RefNetPredictionProvider::keypoints_at(std::uint64_t tau_us) const {
  const std::optional<Mcts> raw = mcts_at(tau_us);
  if (!raw) return std::nullopt;
  const Mcts mcts = crop_to_cells(*raw);
  if (mcts.width == 0 || mcts.height == 0) return std::nullopt;
  const RefNet net(mcts.channel_count(), seed_);
  const Prediction p = net.forward(mcts);
  return describe(detect(decode_cells(p.cells), detection_), p.descriptors, tau_us);
}

}  // namespace evkp
