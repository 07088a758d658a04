#include "evkp/matching.hpp"

#include <algorithm>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"

namespace evkp {
namespace {

constexpr std::uint16_t kSekpVersion = 1;
constexpr std::uint16_t kSemtVersion = 1;
constexpr float kCellCentre = 3.5f;

}  // namespace

Eigen::VectorXf sample_descriptor(const DescriptorGrid<float>& grid, float u, float v) {
  const float width = static_cast<float>(grid.cols * kCellSize);
  const float height = static_cast<float>(grid.rows * kCellSize);
  if (!(u >= 0.0f && u < width && v >= 0.0f && v < height))
    throw InvalidArgument("keypoint (" + std::to_string(u) + ", " + std::to_string(v) +
                          ") outside " + std::to_string(grid.cols * kCellSize) + "x" +
                          std::to_string(grid.rows * kCellSize));
  const float gx = std::clamp((u - kCellCentre) / kCellSize, 0.0f, static_cast<float>(grid.cols - 1));
  const float gy = std::clamp((v - kCellCentre) / kCellSize, 0.0f, static_cast<float>(grid.rows - 1));
  const int c0 = static_cast<int>(gx), r0 = static_cast<int>(gy);
  const int c1 = std::min(c0 + 1, grid.cols - 1), r1 = std::min(r0 + 1, grid.rows - 1);
  const float ax = gx - static_cast<float>(c0), ay = gy - static_cast<float>(r0);

  Eigen::VectorXf d = ((1 - ay) * (1 - ax)) * grid.cell(r0, c0).transpose() +
                      ((1 - ay) * ax) * grid.cell(r0, c1).transpose() +
                      (ay * (1 - ax)) * grid.cell(r1, c0).transpose() +
                      (ay * ax) * grid.cell(r1, c1).transpose();
  const float n = d.norm();
  if (n > 0.0f) d /= n;
  return d;
}

KeypointSet describe(std::vector<Keypoint> keypoints, const DescriptorGrid<float>& grid,
                     std::uint64_t tau_us) {
  DescriptorGrid<float> normalized = grid;
  normalize_cells(normalized);
  KeypointSet set;
  set.tau_us = tau_us;
  set.descriptors.resize(static_cast<Eigen::Index>(keypoints.size()), grid.channels());
  for (std::size_t k = 0; k < keypoints.size(); ++k)
    set.descriptors.row(static_cast<Eigen::Index>(k)) =
        sample_descriptor(normalized, keypoints[k].u, keypoints[k].v).transpose();
  set.keypoints = std::move(keypoints);
  return set;
}

MatchSet match_descriptors(const KeypointSet& a, const KeypointSet& b, const MatchConfig& config) {
  MatchSet out{a.tau_us, b.tau_us, {}};
  const Eigen::Index na = static_cast<Eigen::Index>(a.size());
  const Eigen::Index nb = static_cast<Eigen::Index>(b.size());
  if (a.descriptors.rows() != na || b.descriptors.rows() != nb)
    throw InvalidArgument("descriptor rows must equal keypoint count");
  if (na == 0 || nb == 0) return out;
  if (a.dim() != b.dim())
    throw InvalidArgument("descriptor dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));

  // Pairwise dots row by row, so sim(A, B)(i, j) and sim(B, A)(j, i) agree bitwise.
  DescriptorMatrix sim(na, nb);
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j) sim(i, j) = a.descriptors.row(i).dot(b.descriptors.row(j));

  std::vector<Eigen::Index> best_for_a(na), best_for_b(nb, 0);
  for (Eigen::Index i = 0; i < na; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < nb; ++j)
      if (sim(i, j) > sim(i, best)) best = j;
    best_for_a[i] = best;
  }
  for (Eigen::Index j = 0; j < nb; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < na; ++i)
      if (sim(i, j) > sim(best, j)) best = i;
    best_for_b[j] = best;
  }

  for (Eigen::Index i = 0; i < na; ++i) {
    const Eigen::Index j = best_for_a[i];
    const float s = sim(i, j);
    if (!(s >= config.min_similarity)) continue;
    if (config.mode == MatchMode::kMutual && best_for_b[j] != i) continue;
    out.pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                         std::clamp(s, -1.0f, 1.0f)});
  }
  return out;
}

std::vector<std::uint8_t> encode_keypoints(const KeypointSet& set) {
  if (set.descriptors.rows() != static_cast<Eigen::Index>(set.size()))
    throw InvalidArgument("descriptor rows must equal keypoint count");
  ByteWriter w;
  w.magic("SEKP");
  w.put<std::uint16_t>(kSekpVersion);
  w.put<std::uint64_t>(set.tau_us);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.descriptors.cols()));
  for (const Keypoint& k : set.keypoints) {
    w.put<float>(k.u);
    w.put<float>(k.v);
    w.put<float>(k.s);
  }
  for (Eigen::Index i = 0; i < set.descriptors.size(); ++i) w.put<float>(set.descriptors.data()[i]);
  return w.take();
}

KeypointSet decode_keypoints(std::span<const std::uint8_t> bytes, const std::string& context) {
  ByteReader r(bytes, context);
  r.expect_magic("SEKP");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kSekpVersion) r.fail("unsupported version " + std::to_string(version));
  KeypointSet set;
  set.tau_us = r.get<std::uint64_t>("tau");
  const auto count = r.get<std::uint32_t>("keypoint count");
  const auto dim = r.get<std::uint32_t>("descriptor dimension");
  r.require_records(count, 12, "keypoint records");
  set.keypoints.resize(count);
  for (Keypoint& k : set.keypoints) {
    k.u = r.get<float>("u");
    k.v = r.get<float>("v");
    k.s = r.get<float>("s");
  }
  r.require_records(static_cast<std::uint64_t>(count) * dim, sizeof(float), "descriptors");
  set.descriptors.resize(count, dim);
  for (Eigen::Index i = 0; i < set.descriptors.size(); ++i) set.descriptors.data()[i] = r.get<float>("descriptor");
  r.expect_end();
  return set;
}

void write_keypoints(const KeypointSet& set, const std::filesystem::path& path) {
  write_file_bytes(path, encode_keypoints(set));
}

KeypointSet read_keypoints(const std::filesystem::path& path) {
  return decode_keypoints(read_file_bytes(path), path.string());
}

std::vector<std::uint8_t> encode_matches(const MatchSet& matches) {
  ByteWriter w;
  w.magic("SEMT");
  w.put<std::uint16_t>(kSemtVersion);
  w.put<std::uint64_t>(matches.tau_a);
  w.put<std::uint64_t>(matches.tau_b);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(matches.size()));
  for (const Match& m : matches.pairs) {
    w.put<std::uint32_t>(m.i);
    w.put<std::uint32_t>(m.j);
    w.put<float>(m.similarity);
  }
  return w.take();
}

MatchSet decode_matches(std::span<const std::uint8_t> bytes, const std::string& context) {
  ByteReader r(bytes, context);
  r.expect_magic("SEMT");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kSemtVersion) r.fail("unsupported version " + std::to_string(version));
  MatchSet set;
  set.tau_a = r.get<std::uint64_t>("tau_a");
  set.tau_b = r.get<std::uint64_t>("tau_b");
  const auto count = r.get<std::uint32_t>("match count");
  r.require_records(count, 12, "match records");
  set.pairs.resize(count);
  for (Match& m : set.pairs) {
    m.i = r.get<std::uint32_t>("i");
    m.j = r.get<std::uint32_t>("j");
    m.similarity = r.get<float>("similarity");
  }
  r.expect_end();
  return set;
}

void write_matches(const MatchSet& matches, const std::filesystem::path& path) {
  write_file_bytes(path, encode_matches(matches));
}

MatchSet read_matches(const std::filesystem::path& path) {
  return decode_matches(read_file_bytes(path), path.string());
}

}  // namespace evkp
