#include "evkp/event_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include <json.hpp>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"
#include "text_util.hpp"

namespace evkp {
namespace {

constexpr std::uint16_t kEvt1Version = 1;

// Applies the ordering rule shared by both readers. Returns true if some
// event regressed within the slack and the stream needs re-sorting.
bool check_order(const std::vector<Event>& events, std::uint64_t slack_us,
                 const std::string& context) {
  std::uint64_t latest = 0;
  bool regressed = false;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::uint64_t t = events[i].t;
    if (t < latest) {
      if (latest - t > slack_us)
        throw FormatError(context + ": timestamp regression at event " + std::to_string(i) +
                          " (t=" + std::to_string(t) + " < " + std::to_string(latest) + ")");
      regressed = true;
    }
    latest = std::max(latest, t);
  }
  return regressed;
}

void finalize_order(std::vector<Event>& events, std::uint64_t slack_us, const std::string& context) {
  if (check_order(events, slack_us, context))
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
}

}  // namespace

void validate(const EventStream& stream) {
  std::uint64_t latest = 0;
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.p != 1 && e.p != -1)
      throw InvalidArgument("event " + std::to_string(i) + ": polarity must be -1 or +1");
    if (e.x >= stream.width || e.y >= stream.height)
      throw InvalidArgument("event " + std::to_string(i) + ": pixel (" + std::to_string(e.x) +
                            "," + std::to_string(e.y) + ") outside " +
                            std::to_string(stream.width) + "x" + std::to_string(stream.height));
    if (e.t < latest)
      throw InvalidArgument("event " + std::to_string(i) + ": timestamp decreases");
    latest = e.t;
  }
}

std::vector<std::uint8_t> encode_evt1(const EventStream& stream) {
  validate(stream);
  ByteWriter w;
  w.magic("EVT1");
  w.put<std::uint16_t>(kEvt1Version);
  w.put<std::uint16_t>(stream.width);
  w.put<std::uint16_t>(stream.height);
  w.put<std::uint16_t>(0);
  w.put<std::uint32_t>(0);  // pads count to offset 16
  w.put<std::uint64_t>(stream.events.size());
  for (const Event& e : stream.events) {
    w.put<std::uint64_t>(e.t);
    w.put<std::uint16_t>(e.x);
    w.put<std::uint16_t>(e.y);
    w.put<std::int8_t>(e.p);
  }
  return w.take();
}

EventStream decode_evt1(std::span<const std::uint8_t> bytes, const EventReadOptions& options,
                        const std::string& context) {
  ByteReader r(bytes, context);
  r.expect_magic("EVT1");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kEvt1Version) r.fail("unsupported version " + std::to_string(version));
  EventStream stream;
  stream.width = r.get<std::uint16_t>("width");
  stream.height = r.get<std::uint16_t>("height");
  if (r.get<std::uint16_t>("reserved") != 0 || r.get<std::uint32_t>("padding") != 0)
    r.fail("reserved header bytes must be zero");
  const auto count = r.get<std::uint64_t>("count");
  r.require_records(count, kEvt1RecordSize, "event records");
  stream.events.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    Event& e = stream.events[i];
    e.t = r.get<std::uint64_t>("t");
    e.x = r.get<std::uint16_t>("x");
    e.y = r.get<std::uint16_t>("y");
    e.p = r.get<std::int8_t>("p");
    if ((e.p != 1 && e.p != -1) || e.x >= stream.width || e.y >= stream.height)
      throw FormatError(context + ": record " + std::to_string(i) + " at offset " +
                        std::to_string(at) + " out of bounds or bad polarity");
  }
  r.expect_end();
  finalize_order(stream.events, options.slack_us, context);
  return stream;
}

EventStream parse_events_csv(std::string_view text, const EventReadOptions& options,
                             const std::string& context) {
  EventStream stream;
  const auto lines = detail::split_lines(text);
  std::uint32_t max_x = 0, max_y = 0;
  bool first_row = true;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string_view line = detail::trim(lines[n]);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    const auto where = [&] { return context + ": line " + std::to_string(n + 1); };
    const bool may_be_header = std::exchange(first_row, false);
    if (fields.size() != 4) throw FormatError(where() + ": expected 4 fields t_us,x,y,p");
    const auto t = detail::parse_number<std::uint64_t>(fields[0]);
    const auto x = detail::parse_number<std::uint16_t>(fields[1]);
    const auto y = detail::parse_number<std::uint16_t>(fields[2]);
    const auto p = detail::parse_number<int>(fields[3]);
    if (!t || !x || !y || !p) {
      if (may_be_header && !t) continue;  // header row
      throw FormatError(where() + ": malformed field");
    }
    if (*p != 0 && *p != 1 && *p != -1) throw FormatError(where() + ": polarity must be 0/1 or -1/1");
    stream.events.push_back({*t, *x, *y, static_cast<std::int8_t>(*p == 1 ? 1 : -1)});
    max_x = std::max<std::uint32_t>(max_x, *x);
    max_y = std::max<std::uint32_t>(max_y, *y);
  }
  if (options.width != 0 && options.height != 0) {
    stream.width = options.width;
    stream.height = options.height;
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
      const Event& e = stream.events[i];
      if (e.x >= stream.width || e.y >= stream.height)
        throw FormatError(context + ": event " + std::to_string(i) + " outside sensor bounds");
    }
  } else {
    if (max_x >= std::numeric_limits<std::uint16_t>::max() ||
        max_y >= std::numeric_limits<std::uint16_t>::max())
      throw FormatError(context + ": cannot infer sensor size, coordinates too large");
    stream.width = stream.events.empty() ? 0 : static_cast<std::uint16_t>(max_x + 1);
    stream.height = stream.events.empty() ? 0 : static_cast<std::uint16_t>(max_y + 1);
  }
  finalize_order(stream.events, options.slack_us, context);
  return stream;
}

EventStream read_events(const std::filesystem::path& path, EventFormat format,
                        const EventReadOptions& options) {
  switch (format) {
    case EventFormat::kEvt1:
      return decode_evt1(read_file_bytes(path), options, path.string());
    case EventFormat::kCsv:
      return parse_events_csv(read_file_text(path), options, path.string());
  }
  throw InvalidArgument("unknown event format");
}

void write_events(const EventStream& stream, const std::filesystem::path& path) {
  write_file_bytes(path, encode_evt1(stream));
}

Trajectory parse_trajectory(std::string_view text, const std::string& context) {
  Trajectory poses;
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto where = [&] { return context + ": line " + std::to_string(n + 1); };
    const auto fields = detail::split_whitespace(line);
    if (fields.size() != 8) throw FormatError(where() + ": expected 8 fields t tx ty tz qx qy qz qw");
    double v[8];
    for (int k = 0; k < 8; ++k) {
      const auto parsed = detail::parse_number<double>(fields[k]);
      if (!parsed || !std::isfinite(*parsed)) throw FormatError(where() + ": malformed number");
      v[k] = *parsed;
    }
    PoseStamped pose;
    pose.t = v[0];
    pose.position = {v[1], v[2], v[3]};
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (std::abs(norm - 1.0) > 1e-3)
      throw FormatError(where() + ": quaternion norm " + std::to_string(norm) + " is not unit");
    q.coeffs() /= norm;
    pose.orientation = q;
    if (!poses.empty() && pose.t < poses.back().t)
      throw FormatError(where() + ": timestamps are not monotonic");
    poses.push_back(pose);
  }
  return poses;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  return parse_trajectory(read_file_text(path), path.string());
}

void write_trajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
  std::string out = "# t tx ty tz qx qy qz qw\n";
  char line[256];
  for (const PoseStamped& p : trajectory) {
    const Eigen::Quaterniond& q = p.orientation;
    std::snprintf(line, sizeof(line), "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.t,
                  p.position.x(), p.position.y(), p.position.z(), q.x(), q.y(), q.z(), q.w());
    out += line;
  }
  write_file_text(path, out);
}

CameraIntrinsics parse_intrinsics(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("intrinsics: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("intrinsics: expected a JSON object");
  const auto number = [&](const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("intrinsics: missing key '") + key + "'");
    if (!j[key].is_number()) throw FormatError(std::string("intrinsics: '") + key + "' must be a number");
    return j[key].get<double>();
  };
  CameraIntrinsics k;
  k.fx = number("fx");
  k.fy = number("fy");
  k.cx = number("cx");
  k.cy = number("cy");
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be positive");
  if (!j.contains("dist")) throw FormatError("intrinsics: missing key 'dist'");
  const auto& dist = j["dist"];
  if (!dist.is_array() || dist.size() != 4)
    throw FormatError("intrinsics: 'dist' must be an array of 4 numbers (k1, k2, p1, p2)");
  for (int i = 0; i < 4; ++i) {
    if (!dist[i].is_number()) throw FormatError("intrinsics: 'dist' entries must be numbers");
    k.distortion[i] = dist[i].get<double>();
  }
  return k;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  return parse_intrinsics(read_file_text(path));
}

void write_intrinsics(const CameraIntrinsics& k, const std::filesystem::path& path) {
  nlohmann::json j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                      {"dist", {k.distortion[0], k.distortion[1], k.distortion[2], k.distortion[3]}}};
  write_file_text(path, j.dump(2) + "\n");
}

}  // namespace evkp
