#include "evkp/labelgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"
#include "evkp/rng.hpp"
#include "text_util.hpp"

namespace evkp {
namespace fs = std::filesystem;

void LabelGenConfig::validate() const {
  if (!(median_threshold_px > 0.0)) throw InvalidArgument("median displacement threshold must be positive");
  if (min_matches < 1) throw InvalidArgument("minimum match count must be >= 1");
  if (max_step < 1) throw InvalidArgument("maximum step must be >= 1");
}

namespace {

void check_indices(const MatchSet& matches, const KeypointSet& a, const KeypointSet& b) {
  for (const Match& m : matches.pairs)
    if (m.i >= a.size() || m.j >= b.size())
      throw InvalidArgument("match (" + std::to_string(m.i) + ", " + std::to_string(m.j) +
                            ") indexes past the keypoint sets");
}

}  // namespace

double median_displacement(const MatchSet& matches, const KeypointSet& a, const KeypointSet& b) {
  if (matches.pairs.empty()) throw InvalidArgument("median displacement of an empty match set");
  check_indices(matches, a, b);
  std::vector<double> d;
  d.reserve(matches.size());
  for (const Match& m : matches.pairs) {
    const Keypoint& p = a.keypoints[m.i];
    const Keypoint& q = b.keypoints[m.j];
    d.push_back(std::hypot(static_cast<double>(q.u) - p.u, static_cast<double>(q.v) - p.v));
  }
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

std::vector<LabelPair> generate_pairs(std::span<const KeypointSet> frames, const FrameMatcher& matcher,
                                      const LabelGenConfig& config) {
  config.validate();
  std::vector<LabelPair> pairs;
  Rng rng(config.seed);
  const std::size_t n = frames.size();
  for (std::size_t ref = 0; ref + 1 < n; ++ref) {
    const MatchSet next = matcher(ref, ref + 1);
    if (next.pairs.empty() ||
        !(median_displacement(next, frames[ref], frames[ref + 1]) > config.median_threshold_px))
      continue;
    for (std::size_t offset = 0;;) {
      offset += static_cast<std::size_t>(uniform_int(rng, 1, config.max_step));
      if (ref + offset >= n) break;
      MatchSet matches = matcher(ref, ref + offset);
      if (matches.size() < config.min_matches) break;
      check_indices(matches, frames[ref], frames[ref + offset]);
      pairs.push_back({ref, ref + offset, frames[ref].tau_us, frames[ref + offset].tau_us, std::move(matches)});
    }
  }
  return pairs;
}

std::optional<CellAssignment> assign_cell(const Keypoint& k, int rows, int cols) {
  if (!std::isfinite(k.u) || !std::isfinite(k.v) || k.u < 0.0f || k.v < 0.0f)
    throw InvalidArgument("keypoint coordinates must be finite and non-negative");
  const long x = static_cast<long>(k.u);
  const long y = static_cast<long>(k.v);
  if (x >= static_cast<long>(cols) * kCellSize || y >= static_cast<long>(rows) * kCellSize) return std::nullopt;
  return CellAssignment{static_cast<int>((y / kCellSize) * cols + x / kCellSize),
                        static_cast<int>((y % kCellSize) * kCellSize + x % kCellSize)};
}

TrainingTargets rasterize_targets(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches,
                                  int rows, int cols, std::uint64_t seed) {
  check_indices(matches, a, b);
  const std::size_t cells = static_cast<std::size_t>(rows) * cols;
  Rng rng(seed);

  // winner[cell] = keypoint index kept for that cell, -1 if empty.
  const auto resolve = [&](const KeypointSet& set, DetectorTarget& target) {
    std::vector<std::vector<int>> members(cells);
    std::vector<int> bins(set.size(), 0);
    for (std::size_t k = 0; k < set.size(); ++k) {
      if (const auto at = assign_cell(set.keypoints[k], rows, cols)) {
        members[at->cell].push_back(static_cast<int>(k));
        bins[k] = at->bin;
      }
    }
    target = DetectorTarget::all_dustbin(rows, cols);
    std::vector<int> winner(cells, -1);
    for (std::size_t c = 0; c < cells; ++c) {
      const auto& m = members[c];
      if (m.empty()) continue;
      winner[c] = m.size() == 1 ? m[0] : m[uniform_index(rng, m.size())];
      target.classes[c] = bins[winner[c]];
    }
    return winner;
  };

  TrainingTargets out;
  const std::vector<int> winner_a = resolve(a, out.detector_0);
  const std::vector<int> winner_b = resolve(b, out.detector_1);

  DescriptorTarget& desc = out.descriptor;
  desc.rows = rows;
  desc.cols = cols;
  desc.labeled_a.assign(cells, 0);
  desc.labeled_b.assign(cells, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    desc.labeled_a[c] = winner_a[c] >= 0;
    desc.labeled_b[c] = winner_b[c] >= 0;
  }
  std::vector<std::uint8_t> used_a(cells, 0), used_b(cells, 0);
  for (const Match& m : matches.pairs) {
    const auto ca = assign_cell(a.keypoints[m.i], rows, cols);
    const auto cb = assign_cell(b.keypoints[m.j], rows, cols);
    if (!ca || !cb) continue;
    if (winner_a[ca->cell] != static_cast<int>(m.i) || winner_b[cb->cell] != static_cast<int>(m.j)) continue;
    if (used_a[ca->cell] || used_b[cb->cell]) continue;
    used_a[ca->cell] = used_b[cb->cell] = 1;
    desc.positives.emplace_back(ca->cell, cb->cell);
  }
  return out;
}

FrameSequence load_sequence(const fs::path& directory) {
  FrameSequence seq;
  seq.directory = directory;
  seq.name = directory.filename().string();
  if (seq.name.empty()) seq.name = directory.parent_path().filename().string();
  std::vector<std::pair<KeypointSet, fs::path>> loaded;
  for (const auto& entry : fs::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".sekp")
      loaded.emplace_back(read_keypoints(entry.path()), entry.path());
  std::sort(loaded.begin(), loaded.end(), [](const auto& x, const auto& y) {
    return x.first.tau_us != y.first.tau_us ? x.first.tau_us < y.first.tau_us : x.second < y.second;
  });
  for (std::size_t k = 1; k < loaded.size(); ++k)
    if (loaded[k].first.tau_us == loaded[k - 1].first.tau_us)
      throw FormatError(directory.string() + ": two frames share timestamp " + std::to_string(loaded[k].first.tau_us));
  for (auto& [set, path] : loaded) {
    seq.frames.push_back(std::move(set));
    seq.files.push_back(path);
  }
  return seq;
}

std::vector<fs::path> find_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError(root.string() + " is not a directory");
  const auto has_frames = [](const fs::path& dir) {
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".sekp") return true;
    return false;
  };
  if (has_frames(root)) return {root};
  std::vector<fs::path> found;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && has_frames(entry.path())) found.push_back(entry.path());
  std::sort(found.begin(), found.end());
  return found;
}

std::set<std::string> read_exclusion_list(const fs::path& path) {
  std::set<std::string> names;
  const std::string text = read_file_text(path);
  for (std::string_view line : detail::split_lines(text)) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (!line.empty()) names.emplace(line);
  }
  return names;
}

FrameMatcher make_sequence_matcher(const FrameSequence& sequence, const MatchConfig& fallback) {
  return [&sequence, fallback](std::size_t i, std::size_t j) {
    const KeypointSet& a = sequence.frames.at(i);
    const KeypointSet& b = sequence.frames.at(j);
    const fs::path file = sequence.directory / (std::to_string(a.tau_us) + "_" + std::to_string(b.tau_us) + ".semt");
    if (fs::exists(file)) {
      MatchSet m = read_matches(file);
      if (m.tau_a != a.tau_us || m.tau_b != b.tau_us)
        throw FormatError(file.string() + ": timestamps do not match the file name");
      check_indices(m, a, b);
      return m;
    }
    return match_descriptors(a, b, fallback);
  };
}

LabelRunSummary generate_label_manifest(const fs::path& frames_root, const fs::path& out_dir,
                                        const LabelRunOptions& options) {
  options.config.validate();
  fs::create_directories(out_dir / "matches");
  fs::create_directories(out_dir / "targets");
  LabelRunSummary summary;
  std::string manifest;
  for (const fs::path& dir : find_sequences(frames_root)) {
    FrameSequence seq = load_sequence(dir);
    if (options.excluded.contains(seq.name)) {
      ++summary.excluded;
      continue;
    }
    ++summary.sequences;

    int width = options.width, height = options.height;
    if (width <= 0 || height <= 0) {
      float max_u = 0.0f, max_v = 0.0f;
      for (const KeypointSet& f : seq.frames)
        for (const Keypoint& k : f.keypoints) {
          max_u = std::max(max_u, k.u);
          max_v = std::max(max_v, k.v);
        }
      width = (static_cast<int>(max_u) / kCellSize + 1) * kCellSize;
      height = (static_cast<int>(max_v) / kCellSize + 1) * kCellSize;
    }
    const int rows = height / kCellSize, cols = width / kCellSize;

    const FrameMatcher matcher = make_sequence_matcher(seq, options.matching);
    for (const LabelPair& pair : generate_pairs(seq.frames, matcher, options.config)) {
      const std::string stem = seq.name + "_" + std::to_string(pair.tau_0) + "_" + std::to_string(pair.tau_1);
      const fs::path match_file = fs::path("matches") / (stem + ".semt");
      const fs::path target_file = fs::path("targets") / (stem + ".json");
      write_matches(pair.matches, out_dir / match_file);

      const std::uint64_t seed = hash_combine(hash_combine(options.config.seed, pair.tau_0), pair.tau_1);
      const TrainingTargets t = rasterize_targets(seq.frames[pair.frame_0], seq.frames[pair.frame_1],
                                                  pair.matches, rows, cols, seed);
      nlohmann::json targets = {{"rows", rows},
                                {"cols", cols},
                                {"detector0", t.detector_0.classes},
                                {"detector1", t.detector_1.classes},
                                {"positives", nlohmann::json::array()}};
      std::vector<int> labeled0, labeled1;
      for (std::size_t c = 0; c < t.descriptor.labeled_a.size(); ++c) {
        if (t.descriptor.labeled_a[c]) labeled0.push_back(static_cast<int>(c));
        if (t.descriptor.labeled_b[c]) labeled1.push_back(static_cast<int>(c));
      }
      targets["labeled0"] = labeled0;
      targets["labeled1"] = labeled1;
      for (const auto& [ca, cb] : t.descriptor.positives) targets["positives"].push_back({ca, cb});
      write_file_text(out_dir / target_file, targets.dump() + "\n");

      nlohmann::ordered_json record = {
          {"sequence", seq.name},
          {"tau0", pair.tau_0},
          {"tau1", pair.tau_1},
          {"frame0", fs::absolute(seq.files[pair.frame_0]).lexically_normal().string()},
          {"frame1", fs::absolute(seq.files[pair.frame_1]).lexically_normal().string()},
          {"matches", match_file.generic_string()},
          {"match_count", pair.matches.size()},
          {"targets", target_file.generic_string()}};
      manifest += record.dump() + "\n";
      ++summary.pairs;
    }
  }
  write_file_text(out_dir / "manifest.jsonl", manifest);
  return summary;
}

}  // namespace evkp
