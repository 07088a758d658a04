#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evkp/keypoint.hpp"
#include "evkp/losses.hpp"
#include "evkp/matching.hpp"

namespace evkp {

struct LabelGenConfig {
  double median_threshold_px = 1.0;  // reference frames must move more than this
  std::size_t min_matches = 50;      // pairs with fewer matches end a reference's run
  int max_step = 5;                  // step increments are drawn from {1, ..., max_step}
  std::uint64_t seed = 0;

  void validate() const;
};

/// Median pixel distance between matched keypoints (mean of the middle two
/// for even counts). Throws on an empty match set or invalid indices.
double median_displacement(const MatchSet& matches, const KeypointSet& a, const KeypointSet& b);

/// Matches frame i against frame j (i < j) of the sequence.
using FrameMatcher = std::function<MatchSet(std::size_t i, std::size_t j)>;

struct LabelPair {
  std::size_t frame_0 = 0;
  std::size_t frame_1 = 0;
  std::uint64_t tau_0 = 0;
  std::uint64_t tau_1 = 0;
  MatchSet matches;
};

/// Temporal-matching pair generation over a time-ordered frame sequence.
///
/// Every frame i is tried as a reference. It is skipped as static unless the
/// median displacement of its matches with frame i + 1 exceeds the threshold.
/// Otherwise the offset j starts at 0 and grows by a step drawn uniformly from
/// {1, ..., max_step}; each pair (i, i + j) is emitted until one has fewer
/// than min_matches matches (that pair is discarded) or the sequence ends.
/// One generator seeded with config.seed drives all draws, in order.
std::vector<LabelPair> generate_pairs(std::span<const KeypointSet> frames, const FrameMatcher& matcher,
                                      const LabelGenConfig& config);

struct TrainingTargets {
  DetectorTarget detector_0;
  DetectorTarget detector_1;
  DescriptorTarget descriptor;
};

/// Keypoint with a pixel bin inside its 8x8 cell.
struct CellAssignment {
  int cell = 0;  // row-major cell index
  int bin = 0;   // (v % 8) * 8 + (u % 8)
};

/// Cell of a keypoint, or nullopt when it falls outside the rows x cols grid
/// (e.g. in the margin cropped off a sensor not divisible by 8).
std::optional<CellAssignment> assign_cell(const Keypoint& k, int rows, int cols);

/// Rasterizes a labeled pair onto a rows x cols cell grid. Cells holding more
/// than one keypoint keep one chosen uniformly with `seed` (cells visited in
/// row-major order, side A first). Matches whose keypoints both won their
/// cells become positives.
TrainingTargets rasterize_targets(const KeypointSet& a, const KeypointSet& b, const MatchSet& matches,
                                  int rows, int cols, std::uint64_t seed);

// ---- batch generation over directories -----------------------------------

struct FrameSequence {
  std::string name;
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;  // one SEKP per frame, time-ordered
  std::vector<KeypointSet> frames;
};

/// Loads every *.sekp in `directory`, ordered by timestamp.
FrameSequence load_sequence(const std::filesystem::path& directory);

/// `root` itself if it holds SEKP files, else each subdirectory that does.
std::vector<std::filesystem::path> find_sequences(const std::filesystem::path& root);

/// One sequence name per line; blank lines and '#' comments ignored.
std::set<std::string> read_exclusion_list(const std::filesystem::path& path);

/// Uses `<tau_i>_<tau_j>.semt` from the sequence directory when present,
/// otherwise matches the frames' descriptors.
FrameMatcher make_sequence_matcher(const FrameSequence& sequence, const MatchConfig& fallback);

struct LabelRunOptions {
  LabelGenConfig config;
  MatchConfig matching;
  int width = 0;  // sensor size for rasterization; 0 infers from keypoints
  int height = 0;
  std::set<std::string> excluded;
};

struct LabelRunSummary {
  std::size_t sequences = 0;
  std::size_t excluded = 0;
  std::size_t pairs = 0;
};

/// Generates pairs for every sequence under `frames_root`, writing
/// `manifest.jsonl`, `matches/*.semt` and `targets/*.json` into `out_dir`.
LabelRunSummary generate_label_manifest(const std::filesystem::path& frames_root,
                                        const std::filesystem::path& out_dir, const LabelRunOptions& options);

}  // namespace evkp
