#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "evkp/grid.hpp"
#include "evkp/keypoint.hpp"

namespace evkp {

/// L2-normalizes every cell vector in place; zero vectors stay zero.
template <typename Scalar>
void normalize_cells(DescriptorGrid<Scalar>& grid) {
  for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
    const Scalar n = grid.values.row(i).norm();
    if (n > Scalar(0)) grid.values.row(i) /= n;
  }
}

/// Bilinear interpolation of the four cell-centre descriptors around pixel
/// (u, v), renormalized. Cell (r, c) is centred at (8c + 3.5, 8r + 3.5);
/// coordinates outside the outermost centres clamp to the border cells.
Eigen::VectorXf sample_descriptor(const DescriptorGrid<float>& grid, float u, float v);

/// Attaches descriptors sampled from `grid` (normalized first) to keypoints.
KeypointSet describe(std::vector<Keypoint> keypoints, const DescriptorGrid<float>& grid,
                     std::uint64_t tau_us);

struct Match {
  std::uint32_t i = 0;  // index into set A
  std::uint32_t j = 0;  // index into set B
  float similarity = 0.0f;

  friend bool operator==(const Match&, const Match&) = default;
};

struct MatchSet {
  std::uint64_t tau_a = 0;
  std::uint64_t tau_b = 0;
  std::vector<Match> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

enum class MatchMode {
  kMutual,  // i and j are each other's best match
  kOneWay,  // j is i's best match; B indices may repeat
};

struct MatchConfig {
  float min_similarity = 0.2f;
  MatchMode mode = MatchMode::kMutual;
};

/// Brute-force dot-product matching. Argmax ties go to the lower index; pairs
/// are ordered by i.
MatchSet match_descriptors(const KeypointSet& a, const KeypointSet& b, const MatchConfig& config = {});

inline MatchSet match_mutual_nn(const KeypointSet& a, const KeypointSet& b, float min_similarity) {
  return match_descriptors(a, b, {min_similarity, MatchMode::kMutual});
}

// SEKP: magic "SEKP", u16 version, u64 tau_us, u32 K, u32 D,
//       K x {f32 u, f32 v, f32 s}, K x D f32 descriptors.
std::vector<std::uint8_t> encode_keypoints(const KeypointSet& set);
KeypointSet decode_keypoints(std::span<const std::uint8_t> bytes, const std::string& context = "SEKP");
void write_keypoints(const KeypointSet& set, const std::filesystem::path& path);
KeypointSet read_keypoints(const std::filesystem::path& path);

// SEMT: magic "SEMT", u16 version, u64 tau_a, u64 tau_b, u32 M,
//       M x {u32 i, u32 j, f32 similarity}.
std::vector<std::uint8_t> encode_matches(const MatchSet& matches);
MatchSet decode_matches(std::span<const std::uint8_t> bytes, const std::string& context = "SEMT");
void write_matches(const MatchSet& matches, const std::filesystem::path& path);
MatchSet read_matches(const std::filesystem::path& path);

}  // namespace evkp
