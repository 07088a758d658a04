#include <cmath>

#include <gtest/gtest.h>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"
#include "evkp/matching.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace evkp {
namespace {

DescriptorGrid<float> grid_with(int rows, int cols, int dim, Rng& rng) {
  DescriptorGrid<float> g(rows, cols, dim);
  for (Eigen::Index k = 0; k < g.values.size(); ++k) g.values.data()[k] = static_cast<float>(standard_normal(rng));
  return g;
}

KeypointSet single(const Eigen::VectorXf& d) {
  KeypointSet s;
  s.keypoints = {{1.0f, 1.0f, 1.0f}};
  s.descriptors = d.transpose();
  return s;
}

TEST(SampleDescriptor, CellCentreReturnsThatCell) {
  Rng rng(1);
  DescriptorGrid<float> g = grid_with(3, 4, 16, rng);
  normalize_cells(g);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      const Eigen::VectorXf d = sample_descriptor(g, 8.0f * c + 3.5f, 8.0f * r + 3.5f);
      EXPECT_TRUE(d.isApprox(g.cell(r, c).transpose(), 1e-6f)) << r << "," << c;
    }
}

TEST(SampleDescriptor, MidpointOfIdenticalDescriptors) {
  DescriptorGrid<float> g(1, 2, 3);
  g.cell(0, 0) << 0.0f, 0.6f, 0.8f;
  g.cell(0, 1) << 0.0f, 0.6f, 0.8f;
  const Eigen::VectorXf d = sample_descriptor(g, 7.5f, 3.5f);
  EXPECT_TRUE(d.isApprox(Eigen::Vector3f(0.0f, 0.6f, 0.8f), 1e-6f));
}

TEST(SampleDescriptor, MidpointOfOrthogonalDescriptors) {
  DescriptorGrid<float> g(2, 1, 4);
  g.cell(0, 0) << 1.0f, 0.0f, 0.0f, 0.0f;
  g.cell(1, 0) << 0.0f, 0.0f, 1.0f, 0.0f;
  const Eigen::VectorXf d = sample_descriptor(g, 3.5f, 7.5f);
  const float h = 1.0f / std::sqrt(2.0f);
  EXPECT_TRUE(d.isApprox(Eigen::Vector4f(h, 0.0f, h, 0.0f), 1e-6f));
}

TEST(SampleDescriptor, AnalyticBilinearOracle) {
  Rng rng(2);
  DescriptorGrid<float> g = grid_with(4, 5, 8, rng);
  normalize_cells(g);
  for (int k = 0; k < 200; ++k) {
    const float u = static_cast<float>(uniform_real(rng, 3.5, 8 * 4 + 3.5));
    const float v = static_cast<float>(uniform_real(rng, 3.5, 8 * 3 + 3.5));
    const float gx = (u - 3.5f) / 8.0f, gy = (v - 3.5f) / 8.0f;
    const int c0 = std::min(static_cast<int>(std::floor(gx)), 3), r0 = std::min(static_cast<int>(std::floor(gy)), 2);
    const float ax = gx - c0, ay = gy - r0;
    Eigen::VectorXf expected = (1 - ax) * (1 - ay) * g.cell(r0, c0).transpose() +
                               ax * (1 - ay) * g.cell(r0, c0 + 1).transpose() +
                               (1 - ax) * ay * g.cell(r0 + 1, c0).transpose() +
                               ax * ay * g.cell(r0 + 1, c0 + 1).transpose();
    expected.normalize();
    EXPECT_TRUE(sample_descriptor(g, u, v).isApprox(expected, 1e-5f));
  }
}

TEST(SampleDescriptor, BordersClampToOuterCells) {
  Rng rng(3);
  DescriptorGrid<float> g = grid_with(2, 2, 8, rng);
  normalize_cells(g);
  EXPECT_TRUE(sample_descriptor(g, 0.0f, 0.0f).isApprox(g.cell(0, 0).transpose(), 1e-6f));
  EXPECT_TRUE(sample_descriptor(g, 15.9f, 15.9f).isApprox(g.cell(1, 1).transpose(), 1e-6f));
  EXPECT_THROW(sample_descriptor(g, 16.0f, 0.0f), InvalidArgument);
  EXPECT_THROW(sample_descriptor(g, -0.5f, 0.0f), InvalidArgument);
}

TEST(Describe, NormalizesGridAndKeepsOrder) {
  Rng rng(4);
  const DescriptorGrid<float> g = grid_with(3, 3, 32, rng);
  const std::vector<Keypoint> kps{{3.5f, 3.5f, 0.9f}, {20.0f, 11.0f, 0.5f}};
  const KeypointSet set = describe(kps, g, 77);
  EXPECT_EQ(set.tau_us, 77u);
  EXPECT_EQ(set.keypoints, kps);
  ASSERT_EQ(set.descriptors.rows(), 2);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(set.descriptors.row(k).norm(), 1.0f, 1e-6f);
  EXPECT_TRUE(set.descriptors.row(0).isApprox(g.cell(0, 0).normalized(), 1e-6f));
}

TEST(Match, IdenticalSingletons) {
  const Eigen::Vector4f d(0.5f, 0.5f, 0.5f, 0.5f);
  const MatchSet m = match_mutual_nn(single(d), single(d), 0.2f);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.pairs[0].i, 0u);
  EXPECT_EQ(m.pairs[0].j, 0u);
  EXPECT_FLOAT_EQ(m.pairs[0].similarity, 1.0f);
}

TEST(Match, OrthogonalDescriptorUnmatched) {
  KeypointSet b;
  b.keypoints = {{0, 0, 1}, {1, 1, 1}};
  b.descriptors.resize(2, 3);
  b.descriptors << 1, 0, 0, 0, 1, 0;
  const MatchSet m = match_mutual_nn(single(Eigen::Vector3f(0, 0, 1)), b, 0.2f);
  EXPECT_TRUE(m.pairs.empty());
}

TEST(Match, BelowMinimumSimilarityRejected) {
  const MatchSet m =
      match_mutual_nn(single(Eigen::Vector2f(1, 0)), single(Eigen::Vector2f(0.1f, std::sqrt(0.99f))), 0.2f);
  EXPECT_TRUE(m.pairs.empty());
}

TEST(Match, EqualsExhaustiveMutualOracle) {
  Rng rng(5);
  for (int c = 0; c < 100; ++c) {
    const int dim = static_cast<int>(uniform_int(rng, 2, 16));
    const KeypointSet a = test::random_keypoints(rng, static_cast<std::size_t>(uniform_int(rng, 0, 60)), dim);
    const KeypointSet b = test::random_keypoints(rng, static_cast<std::size_t>(uniform_int(rng, 0, 60)), dim);
    const float min_sim = static_cast<float>(uniform_real(rng, -0.2, 0.6));
    Eigen::MatrixXd sim(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        sim(i, j) = a.descriptors.row(i).dot(b.descriptors.row(j));
    const auto expected = oracle::mutual_nn(sim, min_sim);
    const MatchSet got = match_mutual_nn(a, b, min_sim);
    ASSERT_EQ(got.size(), expected.size()) << "case " << c;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got.pairs[k].i, static_cast<std::uint32_t>(expected[k].first));
      EXPECT_EQ(got.pairs[k].j, static_cast<std::uint32_t>(expected[k].second));
    }
  }
}

TEST(Match, SymmetricUnderSwap) {
  Rng rng(6);
  for (int c = 0; c < 100; ++c) {
    const KeypointSet a = test::random_keypoints(rng, 40, 8, 10);
    const KeypointSet b = test::random_keypoints(rng, 35, 8, 20);
    const MatchSet ab = match_mutual_nn(a, b, 0.0f);
    const MatchSet ba = match_mutual_nn(b, a, 0.0f);
    ASSERT_EQ(ab.size(), ba.size());
    std::vector<Match> transposed;
    for (const Match& m : ba.pairs) transposed.push_back({m.j, m.i, m.similarity});
    std::sort(transposed.begin(), transposed.end(), [](const Match& x, const Match& y) { return x.i < y.i; });
    EXPECT_EQ(transposed, ab.pairs);
    EXPECT_EQ(ab.tau_a, 10u);
    EXPECT_EQ(ba.tau_a, 20u);
  }
}

TEST(Match, TiesGoToLowerIndex) {
  KeypointSet a, b;
  a.keypoints = {{0, 0, 1}};
  a.descriptors.resize(1, 2);
  a.descriptors << 1, 0;
  b.keypoints = {{0, 0, 1}, {1, 1, 1}};
  b.descriptors.resize(2, 2);
  b.descriptors << 1, 0, 1, 0;
  const MatchSet m = match_mutual_nn(a, b, 0.2f);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.pairs[0].j, 0u);
}

TEST(Match, OneWayKeepsRepeatedTargets) {
  KeypointSet a, b;
  a.keypoints = {{0, 0, 1}, {1, 1, 1}};
  a.descriptors.resize(2, 2);
  a.descriptors << 1, 0, 0.8f, 0.6f;
  b.keypoints = {{0, 0, 1}};
  b.descriptors.resize(1, 2);
  b.descriptors << 1, 0;
  EXPECT_EQ(match_descriptors(a, b, {0.2f, MatchMode::kMutual}).size(), 1u);
  const MatchSet one_way = match_descriptors(a, b, {0.2f, MatchMode::kOneWay});
  ASSERT_EQ(one_way.size(), 2u);
  EXPECT_EQ(one_way.pairs[1].j, 0u);
}

TEST(Match, DimensionMismatchThrows) {
  EXPECT_THROW(match_mutual_nn(single(Eigen::Vector2f(1, 0)), single(Eigen::Vector3f(1, 0, 0)), 0.2f),
               InvalidArgument);
}

TEST(Match, EmptySides) {
  KeypointSet empty;
  EXPECT_TRUE(match_mutual_nn(empty, single(Eigen::Vector2f(1, 0)), 0.2f).pairs.empty());
  EXPECT_TRUE(match_mutual_nn(single(Eigen::Vector2f(1, 0)), empty, 0.2f).pairs.empty());
}

class MatchingFiles : public test::TempDirTest {};

TEST_F(MatchingFiles, EmptyKeypointSetRoundTrip) {
  KeypointSet s;
  s.tau_us = 123;
  const KeypointSet back = decode_keypoints(encode_keypoints(s));
  EXPECT_EQ(back.tau_us, 123u);
  EXPECT_EQ(back.size(), 0u);
  EXPECT_EQ(back.dim(), 0);
}

TEST_F(MatchingFiles, RandomizedKeypointRoundTrip) {
  Rng rng(7);
  for (int c = 0; c < 30; ++c) {
    const KeypointSet s = test::random_keypoints(rng, static_cast<std::size_t>(uniform_int(rng, 0, 100)),
                                                 static_cast<int>(uniform_int(rng, 1, 256)),
                                                 static_cast<std::uint64_t>(uniform_int(rng, 0, 1LL << 50)));
    const auto path = dir() / "k.sekp";
    write_keypoints(s, path);
    const KeypointSet back = read_keypoints(path);
    EXPECT_EQ(back.tau_us, s.tau_us);
    EXPECT_EQ(back.keypoints, s.keypoints);
    EXPECT_EQ(back.descriptors, s.descriptors);
    EXPECT_EQ(encode_keypoints(back), read_file_bytes(path));
  }
}

TEST_F(MatchingFiles, RandomizedMatchRoundTrip) {
  Rng rng(8);
  for (int c = 0; c < 30; ++c) {
    MatchSet m{static_cast<std::uint64_t>(uniform_int(rng, 0, 1LL << 40)),
               static_cast<std::uint64_t>(uniform_int(rng, 0, 1LL << 40)), {}};
    const auto n = uniform_int(rng, 0, 500);
    for (std::int64_t k = 0; k < n; ++k)
      m.pairs.push_back({static_cast<std::uint32_t>(uniform_index(rng, 1u << 20)),
                         static_cast<std::uint32_t>(uniform_index(rng, 1u << 20)),
                         static_cast<float>(uniform_real(rng, -1, 1))});
    write_matches(m, dir() / "m.semt");
    EXPECT_EQ(read_matches(dir() / "m.semt"), m);
  }
}

TEST_F(MatchingFiles, GoldenKeypoints) {
  const auto path = test::data_dir() / "keypoints_2.sekp";
  const KeypointSet s = read_keypoints(path);
  EXPECT_EQ(s.tau_us, 1000000u);
  ASSERT_EQ(s.size(), 2u);
  ASSERT_EQ(s.dim(), 4);
  EXPECT_EQ(s.keypoints[0], (Keypoint{10.5f, 20.25f, 0.75f}));
  EXPECT_EQ(s.keypoints[1], (Keypoint{0.0f, 0.0f, 0.5f}));
  EXPECT_EQ(s.descriptors.row(0), Eigen::RowVector4f(1, 0, 0, 0));
  EXPECT_EQ(s.descriptors.row(1), Eigen::RowVector4f(0, 0.6f, 0.8f, 0));
  EXPECT_EQ(encode_keypoints(s), read_file_bytes(path));

  const KeypointSet empty = read_keypoints(test::data_dir() / "keypoints_empty.sekp");
  EXPECT_EQ(empty.tau_us, 42u);
  EXPECT_EQ(empty.size(), 0u);
}

TEST_F(MatchingFiles, GoldenMatches) {
  const auto path = test::data_dir() / "matches_2.semt";
  const MatchSet m = read_matches(path);
  EXPECT_EQ(m.tau_a, 1000000u);
  EXPECT_EQ(m.tau_b, 1033333u);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.pairs[0], (Match{0, 1, 0.95f}));
  EXPECT_EQ(m.pairs[1], (Match{1, 0, 0.25f}));
  EXPECT_EQ(encode_matches(m), read_file_bytes(path));
}

TEST_F(MatchingFiles, VersionTwoIsUnsupported) {
  try {
    read_keypoints(test::data_dir() / "keypoints_v2.sekp");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported version"), std::string::npos) << e.what();
  }
  MatchSet m;
  auto bytes = encode_matches(m);
  bytes[4] = 2;
  EXPECT_THROW(decode_matches(bytes), FormatError);
}

TEST_F(MatchingFiles, TruncatedAndBadMagic) {
  Rng rng(9);
  auto bytes = encode_keypoints(test::random_keypoints(rng, 3, 4));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 2);
  EXPECT_THROW(decode_keypoints(truncated), FormatError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_keypoints(bytes), FormatError);
}

TEST_F(MatchingFiles, ExporterToySequenceReadable) {
  const auto seq = test::data_dir() / "toy_sequence";
  const KeypointSet f0 = read_keypoints(seq / "1000000.sekp");
  const KeypointSet f1 = read_keypoints(seq / "1050000.sekp");
  const MatchSet m = read_matches(seq / "1000000_1050000.semt");
  ASSERT_EQ(f0.size(), 60u);
  ASSERT_EQ(f1.size(), 60u);
  ASSERT_EQ(m.size(), 60u);
  for (std::size_t k = 0; k < f0.size(); ++k) EXPECT_NEAR(f0.descriptors.row(k).norm(), 1.0f, 1e-6f);
  for (const Match& x : m.pairs) {
    EXPECT_EQ(f1.keypoints[x.j].u, f0.keypoints[x.i].u + 3.0f);
    EXPECT_EQ(f1.keypoints[x.j].v, f0.keypoints[x.i].v - 2.0f);
  }
  // The stored matches agree with mutual-NN matching of the stored descriptors.
  const MatchSet recomputed = match_mutual_nn(f0, f1, 0.2f);
  ASSERT_EQ(recomputed.size(), m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    EXPECT_EQ(recomputed.pairs[k].i, m.pairs[k].i);
    EXPECT_EQ(recomputed.pairs[k].j, m.pairs[k].j);
  }
}

}  // namespace
}  // namespace evkp
