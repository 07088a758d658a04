#include "evkp/representation.hpp"

#include <algorithm>
#include <cmath>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"

namespace evkp {
namespace {

constexpr std::uint16_t kMctsVersion = 1;

void check_geometry(int width, int height) {
  if (width < 0 || height < 0) throw InvalidArgument("negative sensor size");
}

}  // namespace

TimeWindowSet::TimeWindowSet() : seconds_{0.001, 0.003, 0.01, 0.03, 0.1} {}

TimeWindowSet::TimeWindowSet(std::vector<double> seconds) : seconds_(std::move(seconds)) {
  if (seconds_.empty()) throw InvalidArgument("time window set must not be empty");
  for (std::size_t i = 0; i < seconds_.size(); ++i) {
    if (!(seconds_[i] > 0.0) || !std::isfinite(seconds_[i]))
      throw InvalidArgument("time window " + std::to_string(i) + " must be positive");
    if (i > 0 && !(seconds_[i] > seconds_[i - 1]))
      throw InvalidArgument("time windows must be strictly increasing");
  }
}

ImageF time_surface(std::span<const Event> events, std::uint64_t tau_us, double window_s,
                    int polarity, int width, int height) {
  if (!(window_s > 0.0)) throw InvalidArgument("time window must be positive");
  check_geometry(width, height);
  ImageF surface = ImageF::Zero(height, width);
  for (const Event& e : events) {
    if (e.p != polarity || e.t > tau_us) continue;
    if (e.x >= width || e.y >= height) throw InvalidArgument("event outside sensor bounds");
    float& cell = surface(e.y, e.x);
    cell = std::max(cell, decay_value(tau_us, e.t, window_s));
  }
  return surface;
}

Mcts build_mcts(std::span<const Event> events, std::uint64_t tau_us, const TimeWindowSet& windows,
                int width, int height) {
  check_geometry(width, height);
  const std::size_t n = windows.size();
  Mcts mcts{width, height, windows, tau_us, {}};
  mcts.channels.assign(2 * n, ImageF::Zero(height, width));
  for (const Event& e : events) {
    if (e.t > tau_us) continue;
    if (e.x >= width || e.y >= height) throw InvalidArgument("event outside sensor bounds");
    if (e.p != 1 && e.p != -1) throw InvalidArgument("polarity must be -1 or +1");
    for (std::size_t w = 0; w < n; ++w) {
      float& cell = mcts.channels[Mcts::mcts_channel(e.p, w, n)](e.y, e.x);
      cell = std::max(cell, decay_value(tau_us, e.t, windows[w]));
    }
  }
  return mcts;
}

ActiveEventSurface::ActiveEventSurface(int width, int height, std::uint64_t slack_us)
    : width_(width), height_(height), slack_us_(slack_us) {
  check_geometry(width, height);
  const std::size_t cells = static_cast<std::size_t>(width) * height;
  neg_.assign(cells, kNever);
  pos_.assign(cells, kNever);
}

void ActiveEventSurface::ingest(const Event& e) {
  if (e.x >= width_ || e.y >= height_)
    throw InvalidArgument("event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                          ") outside " + std::to_string(width_) + "x" + std::to_string(height_));
  if (e.p != 1 && e.p != -1) throw InvalidArgument("polarity must be -1 or +1");
  std::uint64_t& cell = (e.p > 0 ? pos_ : neg_)[static_cast<std::size_t>(e.y) * width_ + e.x];
  if (cell == kNever || e.t >= cell) {
    cell = e.t;
  } else if (cell - e.t > slack_us_) {
    throw InvalidArgument("out-of-order event at (" + std::to_string(e.x) + "," +
                          std::to_string(e.y) + "): t=" + std::to_string(e.t) +
                          " older than stored " + std::to_string(cell));
  }
  latest_ = std::max(latest_, e.t);
}

void ActiveEventSurface::ingest(std::span<const Event> events) {
  for (const Event& e : events) ingest(e);
}

std::size_t ActiveEventSurface::populated() const {
  const auto count = [](const std::vector<std::uint64_t>& v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](std::uint64_t t) { return t != kNever; }));
  };
  return count(neg_) + count(pos_);
}

Mcts mcts_from_aes(const ActiveEventSurface& surface, std::uint64_t tau_us,
                   const TimeWindowSet& windows) {
  Mcts mcts;
  mcts_from_aes(surface, tau_us, windows, mcts);
  return mcts;
}

void mcts_from_aes(const ActiveEventSurface& surface, std::uint64_t tau_us, const TimeWindowSet& windows,
                   Mcts& mcts) {
  const int width = surface.width();
  const int height = surface.height();
  const std::size_t n = windows.size();
  mcts.width = width;
  mcts.height = height;
  mcts.windows = windows;
  mcts.tau_us = tau_us;
  mcts.channels.resize(2 * n);
  for (ImageF& c : mcts.channels) c.setZero(height, width);

  std::vector<double> inv_window_us(n);
  for (std::size_t w = 0; w < n; ++w) inv_window_us[w] = 1.0 / (windows[w] * 1e6);
  std::vector<float*> out(2 * n);
  for (std::size_t c = 0; c < 2 * n; ++c) out[c] = mcts.channels[c].data();

  for (int polarity : {-1, 1}) {
    const std::span<const std::uint64_t> stamps = surface.timestamps(polarity);
    float* const* planes = out.data() + Mcts::mcts_channel(polarity, 0, n);
    for (std::size_t i = 0; i < stamps.size(); ++i) {
      const std::uint64_t t = stamps[i];
      if (t == ActiveEventSurface::kNever || t > tau_us) continue;
      const double age_us = static_cast<double>(tau_us - t);
      // Windows ascend, so once a window has expired all shorter ones have too.
      for (std::size_t w = n; w-- > 0;) {
        const float v = decay_from_age(age_us, inv_window_us[w]);
        if (v == 0.0f) break;
        planes[w][i] = v;
      }
    }
  }
}

std::vector<std::uint8_t> encode_mcts(const Mcts& mcts) {
  const std::size_t n = mcts.windows.size();
  if (mcts.channels.size() != 2 * n) throw InvalidArgument("MCTS channel count must be twice the window count");
  ByteWriter w;
  w.magic("MCTS");
  w.put<std::uint16_t>(kMctsVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(mcts.width));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(mcts.height));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(2 * n));
  w.put<std::uint64_t>(mcts.tau_us);
  for (double s : mcts.windows.seconds()) w.put<double>(s);
  for (const ImageF& c : mcts.channels) {
    if (c.rows() != mcts.height || c.cols() != mcts.width) throw InvalidArgument("MCTS channel shape mismatch");
    for (Eigen::Index i = 0; i < c.size(); ++i) w.put<float>(c.data()[i]);
  }
  return w.take();
}

Mcts decode_mcts(std::span<const std::uint8_t> bytes, const std::string& context) {
  ByteReader r(bytes, context);
  r.expect_magic("MCTS");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kMctsVersion) r.fail("unsupported version " + std::to_string(version));
  const int width = r.get<std::uint16_t>("width");
  const int height = r.get<std::uint16_t>("height");
  const int channels = r.get<std::uint16_t>("channels");
  if (channels == 0 || channels % 2 != 0) r.fail("channel count must be even and positive");
  const auto tau = r.get<std::uint64_t>("tau");
  std::vector<double> seconds(channels / 2);
  for (double& s : seconds) s = r.get<double>("window");
  Mcts mcts;
  try {
    mcts.windows = TimeWindowSet(std::move(seconds));
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  mcts.width = width;
  mcts.height = height;
  mcts.tau_us = tau;
  r.require_records(static_cast<std::uint64_t>(channels) * width * height, sizeof(float), "channel data");
  mcts.channels.assign(channels, ImageF(height, width));
  for (ImageF& c : mcts.channels)
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = r.get<float>("value");
  r.expect_end();
  return mcts;
}

void write_mcts(const Mcts& mcts, const std::filesystem::path& path) {
  write_file_bytes(path, encode_mcts(mcts));
}

Mcts read_mcts(const std::filesystem::path& path) {
  return decode_mcts(read_file_bytes(path), path.string());
}

}  // namespace evkp
