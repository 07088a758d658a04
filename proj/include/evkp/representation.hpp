#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "evkp/event_io.hpp"

namespace evkp {

/// Row-major single-channel float image, indexed (row = y, col = x).
using ImageF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Strictly increasing, positive time-window lengths in seconds.
class TimeWindowSet {
 public:
  /// The default 5-window set {1, 3, 10, 30, 100} ms.
  TimeWindowSet();
  explicit TimeWindowSet(std::vector<double> seconds);

  std::size_t size() const { return seconds_.size(); }
  double operator[](std::size_t i) const { return seconds_[i]; }
  const std::vector<double>& seconds() const { return seconds_; }
  double largest() const { return seconds_.back(); }

  friend bool operator==(const TimeWindowSet&, const TimeWindowSet&) = default;

 private:
  std::vector<double> seconds_;
};

/// Time-surface value of an event of age `tau_us - t_us` under a window of
/// `window_s` seconds: 1 - age/window inside (tau - window, tau], else 0.
/// Values within 1e-12 of zero count as expired, so an age equal to the
/// window gives exactly 0 despite the decimal window not being exact.
/// Every surface in this module is built from this one function, so all
/// construction paths agree bitwise.
inline float decay_from_age(double age_us, double inv_window_us) {
  const double v = 1.0 - age_us * inv_window_us;
  if (v <= 1e-12) return 0.0f;
  return static_cast<float>(v > 1.0 ? 1.0 : v);
}

inline float decay_value(std::uint64_t tau_us, std::uint64_t t_us, double window_s) {
  if (t_us > tau_us) return 0.0f;
  return decay_from_age(static_cast<double>(tau_us - t_us), 1.0 / (window_s * 1e6));
}

/// Single-polarity, single-window time surface at time tau. Events newer than
/// tau are ignored.
ImageF time_surface(std::span<const Event> events, std::uint64_t tau_us, double window_s,
                    int polarity, int width, int height);

/// Multi-channel time surface: 2N channels ordered
/// (neg, w_1) ... (neg, w_N), (pos, w_1) ... (pos, w_N).
struct Mcts {
  int width = 0;
  int height = 0;
  TimeWindowSet windows;
  std::uint64_t tau_us = 0;
  std::vector<ImageF> channels;

  int channel_count() const { return static_cast<int>(channels.size()); }
  const ImageF& channel(int polarity, std::size_t window) const {
    return channels[mcts_channel(polarity, window, windows.size())];
  }

  /// Index of the (polarity, window) channel with `n_windows` windows.
  static std::size_t mcts_channel(int polarity, std::size_t window, std::size_t n_windows) {
    return (polarity > 0 ? n_windows : 0) + window;
  }
};

Mcts build_mcts(std::span<const Event> events, std::uint64_t tau_us, const TimeWindowSet& windows,
                int width, int height);

/// Per-polarity, per-pixel timestamp of the most recent event. Single writer;
/// events must arrive in stream order per cell.
class ActiveEventSurface {
 public:
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

  ActiveEventSurface(int width, int height, std::uint64_t slack_us = 0);

  /// Records `e`. Throws InvalidArgument for out-of-bounds pixels or bad
  /// polarity, and when `e` is older than the stored cell by more than the slack.
  void ingest(const Event& e);
  void ingest(std::span<const Event> events);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint64_t latest() const { return latest_; }
  /// Stored timestamp, or kNever.
  std::uint64_t at(int polarity, int x, int y) const {
    return plane(polarity)[static_cast<std::size_t>(y) * width_ + x];
  }
  /// Row-major timestamps of one polarity plane.
  std::span<const std::uint64_t> timestamps(int polarity) const { return plane(polarity); }
  std::size_t populated() const;

 private:
  const std::vector<std::uint64_t>& plane(int polarity) const { return polarity > 0 ? pos_ : neg_; }

  int width_;
  int height_;
  std::uint64_t slack_us_;
  std::uint64_t latest_ = 0;
  std::vector<std::uint64_t> neg_;
  std::vector<std::uint64_t> pos_;
};

/// Materializes the Mcts at tau from a surface built from all events with
/// t <= tau. Bitwise equal to build_mcts over the same events.
Mcts mcts_from_aes(const ActiveEventSurface& surface, std::uint64_t tau_us,
                   const TimeWindowSet& windows);
/// Same, reusing the channel storage of `out` when the shape already fits.
void mcts_from_aes(const ActiveEventSurface& surface, std::uint64_t tau_us, const TimeWindowSet& windows,
                   Mcts& out);

// MCTS container: magic "MCTS", u16 version, u16 width, u16 height,
// u16 channels, u64 tau_us, N x f64 window seconds, channel-major f32 data.
std::vector<std::uint8_t> encode_mcts(const Mcts& mcts);
Mcts decode_mcts(std::span<const std::uint8_t> bytes, const std::string& context = "MCTS");
void write_mcts(const Mcts& mcts, const std::filesystem::path& path);
Mcts read_mcts(const std::filesystem::path& path);

}  // namespace evkp
