#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evkp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Randomized equivalence of mcts_from_aes and build_mcts (bitwise), plus
/// agreement of both with a per-event scan.
CheckResult check_mcts_oracle(int cases, std::uint64_t seed);
/// Time-surface values at age 0, half a window and a full window.
CheckResult check_decay_points();
/// NMS against the exhaustive neighborhood scan, plus plateau fixtures.
CheckResult check_nms_oracle(int cases, std::uint64_t seed);
/// Detector and descriptor loss gradients against central differences.
CheckResult check_detector_gradients(int cases, std::uint64_t seed);
CheckResult check_descriptor_gradients(int cases, std::uint64_t seed);
/// Descriptor hinge values on identical, orthogonal and at-margin fixtures.
CheckResult check_descriptor_points();
/// auc against midpoint integration of the recall curve.
CheckResult check_auc_oracle(int cases, std::uint64_t seed);

/// Pair generation against a direct simulation on scripted sequences (the
/// first one with seed 0), plus a fully static sequence that must yield no pairs.
CheckResult check_labelgen_oracle(int cases, std::uint64_t seed);
/// Relative rotation on random two-view scenes. Passes when at least
/// `min_within` scenes have rotation error below `max_error_deg`.
CheckResult check_pose_scenes(int scenes, double outlier_ratio, double max_error_deg, int min_within,
                              std::uint64_t seed);

/// The oracle suites run by `evkp selftest`.
std::vector<CheckResult> run_oracle_suites(std::uint64_t seed = 0);

struct ThroughputResult {
  double events_per_second = 0.0;
  double ms_per_materialization = 0.0;
  std::size_t events = 0;
};

/// AES ingestion and 10-channel MCTS materialization at 640 x 480.
ThroughputResult measure_throughput(std::size_t events = 5'000'000, int materializations = 10,
                                    std::uint64_t seed = 0);

inline constexpr double kMinEventsPerSecond = 5e6;
inline constexpr double kMaxMaterializationMs = 20.0;

}  // namespace evkp
