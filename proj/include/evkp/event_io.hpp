#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evkp {

/// A single polarity event. Polarity is stored as -1 / +1.
struct Event {
  std::uint64_t t = 0;  // microseconds since stream epoch
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Events of one sensor, non-decreasing in time and within sensor bounds.
struct EventStream {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<Event> events;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

enum class EventFormat { kCsv, kEvt1 };

struct EventReadOptions {
  /// Largest tolerated backwards jump in time; later events inside the slack
  /// are accepted and the stream is stably re-sorted.
  std::uint64_t slack_us = 0;
  /// Sensor size for CSV input (EVT1 carries its own). Zero infers max+1.
  std::uint16_t width = 0;
  std::uint16_t height = 0;
};

/// Throws InvalidArgument on the first event that violates polarity, bounds
/// or ordering; the message carries the event index.
void validate(const EventStream& stream);

EventStream read_events(const std::filesystem::path& path, EventFormat format,
                        const EventReadOptions& options = {});
void write_events(const EventStream& stream, const std::filesystem::path& path);

// In-memory codecs behind the file functions.
std::vector<std::uint8_t> encode_evt1(const EventStream& stream);
EventStream decode_evt1(std::span<const std::uint8_t> bytes, const EventReadOptions& options = {},
                        const std::string& context = "EVT1");
EventStream parse_events_csv(std::string_view text, const EventReadOptions& options = {},
                             const std::string& context = "CSV");

// EVT1: magic "EVT1", u16 version, u16 width, u16 height, u16 reserved,
// 4 zero bytes, u64 count (at offset 16), then 13-byte records
// {u64 t, u16 x, u16 y, i8 p}. All little-endian.
inline constexpr std::size_t kEvt1HeaderSize = 24;
inline constexpr std::size_t kEvt1RecordSize = 13;

/// Ground-truth pose, camera-to-world, TUM convention.
struct PoseStamped {
  double t = 0.0;  // seconds
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

using Trajectory = std::vector<PoseStamped>;

/// Reads `t tx ty tz qx qy qz qw` rows. Quaternions within 1e-3 of unit norm
/// are renormalized; anything further off is rejected.
Trajectory read_trajectory(const std::filesystem::path& path);
Trajectory parse_trajectory(std::string_view text, const std::string& context = "trajectory");
void write_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);

/// Pinhole intrinsics with radial-tangential distortion (k1, k2, p1, p2).
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Vector4d distortion = Eigen::Vector4d::Zero();
};

CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
CameraIntrinsics parse_intrinsics(std::string_view json_text);
void write_intrinsics(const CameraIntrinsics& intrinsics, const std::filesystem::path& path);

}  // namespace evkp
