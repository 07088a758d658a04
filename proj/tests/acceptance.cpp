// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evkp/binary.hpp"
#include "evkp/event_io.hpp"
#include "evkp/matching.hpp"
#include "evkp/representation.hpp"
#include "evkp/rng.hpp"
#include "evkp/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace evkp;

namespace {

struct Criterion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt_seconds(double s) {
  std::ostringstream out;
  out.precision(3);
  out << s << " s";
  return out.str();
}

struct Command {
  int code = -1;
  std::string output;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Command run_command(const std::string& command) {
  Command r;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Criterion from_checks(std::string name, const std::vector<CheckResult>& checks, double seconds, double limit_s) {
  Criterion c{std::move(name), true, {}};
  for (const CheckResult& r : checks) {
    if (!c.detail.empty()) c.detail += "; ";
    c.detail += r.detail;
    c.passed = c.passed && r.passed;
  }
  c.detail += "; " + fmt_seconds(seconds);
  if (limit_s > 0 && seconds >= limit_s) {
    c.passed = false;
    c.detail += " (limit " + fmt_seconds(limit_s) + ")";
  }
  return c;
}

Criterion mcts_oracle() {
  const Timer t;
  const std::vector<CheckResult> results{check_mcts_oracle(1000, 101)};
  return from_checks("MCTS oracle equivalence (1000 streams, < 30 s)", results, t.seconds(), 30.0);
}

Criterion decay_points() {
  const Timer t;
  const std::vector<CheckResult> results{check_decay_points()};
  return from_checks("time-surface point values", results, t.seconds(), 0);
}

Criterion nms_oracle() {
  const Timer t;
  const std::vector<CheckResult> results{check_nms_oracle(1000, 102)};
  return from_checks("NMS oracle (1000 heatmaps, plateau fixtures)", results, t.seconds(), 0);
}

Criterion loss_gradients() {
  const Timer t;
  const std::vector<CheckResult> results{check_detector_gradients(100, 103),
                                         check_descriptor_gradients(100, 104), check_descriptor_points()};
  return from_checks("loss gradients, ln 65 and descriptor point values", results, t.seconds(), 0);
}

Criterion auc_oracle() {
  const Timer t;
  const std::vector<CheckResult> results{check_auc_oracle(100, 105)};
  return from_checks("AUC oracle (100 lists, {2, 4, inf}@5 = 4/15)", results, t.seconds(), 0);
}

Criterion pose_recovery() {
  const Timer t;
  const std::vector<CheckResult> results{check_pose_scenes(100, 0.0, 0.1, 100, 106),
                                         check_pose_scenes(100, 0.4, 0.5, 99, 107)};
  return from_checks("synthetic pose recovery (100 exact, 100 with 40% outliers, < 60 s)", results, t.seconds(),
                     60.0);
}

Criterion labelgen_oracle() {
  const Timer t;
  const std::vector<CheckResult> results{check_labelgen_oracle(100, 0)};
  return from_checks("label generation simulation and static sequence", results, t.seconds(), 0);
}

Criterion bench_determinism(const std::string& cli, const fs::path& work) {
  Criterion c{"bench pose determinism (2 runs, 1 vs 4 threads, AUC@5 >= 0.95)", false, {}};
  const Timer t;
  const fs::path fixture = work / "synth";
  const Command synth = run_command(quote(cli) + " synth pose --out " + quote(fixture.string()));
  if (synth.code != 0) {
    c.detail = "synth pose failed: " + synth.output;
    return c;
  }
  const std::string common = quote(cli) + " bench pose --trajectory " + quote((fixture / "trajectory.txt").string()) +
                             " --intrinsics " + quote((fixture / "intrinsics.json").string()) + " --predictions " +
                             quote((fixture / "predictions").string()) + " --config " +
                             quote((fixture / "config.toml").string());
  const struct {
    const char* dir;
    int threads;
  } runs[] = {{"run_a", 1}, {"run_b", 1}, {"run_c", 4}};
  std::string first_output;
  for (const auto& run : runs) {
    const Command r =
        run_command(common + " --threads " + std::to_string(run.threads) + " --out " + quote((work / run.dir).string()));
    if (r.code != 0) {
      c.detail = std::string(run.dir) + " failed: " + r.output;
      return c;
    }
    if (first_output.empty()) first_output = r.output;
  }
  for (const char* file : {"samples.csv", "summary.json", "curve.csv"}) {
    const auto a = read_file_bytes(work / "run_a" / file);
    if (read_file_bytes(work / "run_b" / file) != a || read_file_bytes(work / "run_c" / file) != a) {
      c.detail = std::string(file) + " differs between runs";
      return c;
    }
  }
  std::smatch m;
  if (!std::regex_search(first_output, m, std::regex("auc@5=([0-9.eE+-]+)"))) {
    c.detail = "no auc@5 in output: " + first_output;
    return c;
  }
  const double auc5 = std::stod(m[1]);
  c.passed = auc5 >= 0.95;
  std::string summary = first_output;
  while (!summary.empty() && summary.back() == '\n') summary.pop_back();
  c.detail = summary + "; reports byte-identical; " + fmt_seconds(t.seconds());
  return c;
}

Criterion throughput(const std::string& cli) {
  Criterion c{"throughput (selftest --bench)", false, {}};
  const Command r = run_command(quote(cli) + " selftest --bench");
  std::istringstream lines(r.output);
  int passing = 0;
  for (std::string l; std::getline(lines, l);) {
    if (l.find("throughput:") == std::string::npos) continue;
    if (!c.detail.empty()) c.detail += "; ";
    c.detail += l;
    if (l.rfind("PASS", 0) == 0) ++passing;
  }
  c.passed = r.code == 0 && passing == 2;
  if (c.detail.empty()) c.detail = "no throughput lines: " + r.output;
  return c;
}

template <typename T>
bool expect(bool ok, const T& what, std::string& failure) {
  if (!ok && failure.empty()) {
    std::ostringstream msg;
    msg << what;
    failure = msg.str();
  }
  return ok;
}

Criterion format_round_trips(const fs::path& data) {
  Criterion c{"format round-trips and golden fixtures", false, {}};
  std::string failure;
  Rng rng(108);
  int cases = 0;
  try {
    for (int k = 0; k < 50; ++k, ++cases) {
      EventStream s{static_cast<std::uint16_t>(uniform_int(rng, 1, 2048)),
                    static_cast<std::uint16_t>(uniform_int(rng, 1, 2048)), {}};
      std::uint64_t t = 0;
      const auto n = uniform_int(rng, 0, 2000);
      for (std::int64_t e = 0; e < n; ++e) {
        t += static_cast<std::uint64_t>(uniform_int(rng, 0, 1000));
        s.events.push_back({t, static_cast<std::uint16_t>(uniform_index(rng, s.width)),
                            static_cast<std::uint16_t>(uniform_index(rng, s.height)),
                            static_cast<std::int8_t>(uniform_index(rng, 2) ? 1 : -1)});
      }
      expect(decode_evt1(encode_evt1(s)) == s, "EVT1 round-trip", failure);

      KeypointSet kp;
      kp.tau_us = rng();
      const auto count = uniform_int(rng, 0, 200);
      const auto dim = uniform_int(rng, 1, 256);
      kp.descriptors.resize(count, dim);
      for (std::int64_t i = 0; i < count; ++i) {
        kp.keypoints.push_back({static_cast<float>(uniform_real(rng, 0, 640)),
                                static_cast<float>(uniform_real(rng, 0, 480)), static_cast<float>(uniform_unit(rng))});
        for (std::int64_t d = 0; d < dim; ++d) kp.descriptors(i, d) = static_cast<float>(standard_normal(rng));
      }
      const KeypointSet kp2 = decode_keypoints(encode_keypoints(kp));
      expect(kp2.tau_us == kp.tau_us && kp2.keypoints == kp.keypoints && kp2.descriptors == kp.descriptors,
             "SEKP round-trip", failure);

      MatchSet ms{rng(), rng(), {}};
      for (std::int64_t i = 0, m = uniform_int(rng, 0, 300); i < m; ++i)
        ms.pairs.push_back({static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()),
                            static_cast<float>(uniform_real(rng, -1, 1))});
      expect(decode_matches(encode_matches(ms)) == ms, "SEMT round-trip", failure);

      const int w = static_cast<int>(uniform_int(rng, 1, 40)), h = static_cast<int>(uniform_int(rng, 1, 40));
      Mcts mc;
      mc.width = w;
      mc.height = h;
      mc.tau_us = rng();
      mc.windows = TimeWindowSet(std::vector<double>{0.002, 0.02, 0.2});
      for (int ch = 0; ch < 6; ++ch) {
        ImageF img(h, w);
        for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(uniform_unit(rng));
        mc.channels.push_back(img);
      }
      const auto bytes = encode_mcts(mc);
      expect(encode_mcts(decode_mcts(bytes)) == bytes, "MCTS round-trip", failure);
    }

    const auto same_bytes = [&](const fs::path& file, const std::vector<std::uint8_t>& encoded) {
      expect(read_file_bytes(file) == encoded, file.filename().string() + " does not re-encode byte-for-byte", failure);
    };
    const EventStream ev = read_events(data / "events_3.evt1", EventFormat::kEvt1);
    expect(ev.width == 32 && ev.height == 24 && ev.events.size() == 3 && ev.events[0] == Event{100, 3, 4, 1} &&
               ev.events[1] == Event{150, 31, 0, -1} && ev.events[2] == Event{150, 0, 23, 1},
           "events_3.evt1 values", failure);
    same_bytes(data / "events_3.evt1", encode_evt1(ev));
    const EventStream empty = read_events(data / "events_empty.evt1", EventFormat::kEvt1);
    expect(empty.width == 640 && empty.height == 480 && empty.events.empty(), "events_empty.evt1 values", failure);
    same_bytes(data / "events_empty.evt1", encode_evt1(empty));

    const KeypointSet k2 = read_keypoints(data / "keypoints_2.sekp");
    expect(k2.tau_us == 1000000 && k2.size() == 2 && k2.keypoints[0] == Keypoint{10.5f, 20.25f, 0.75f} &&
               k2.keypoints[1] == Keypoint{0.0f, 0.0f, 0.5f} &&
               k2.descriptors.row(1) == Eigen::RowVector4f(0.0f, 0.6f, 0.8f, 0.0f),
           "keypoints_2.sekp values", failure);
    same_bytes(data / "keypoints_2.sekp", encode_keypoints(k2));
    const KeypointSet k0 = read_keypoints(data / "keypoints_empty.sekp");
    expect(k0.tau_us == 42 && k0.size() == 0, "keypoints_empty.sekp values", failure);
    same_bytes(data / "keypoints_empty.sekp", encode_keypoints(k0));
    bool rejected = false;
    try {
      read_keypoints(data / "keypoints_v2.sekp");
    } catch (const FormatError& e) {
      rejected = std::string(e.what()).find("unsupported version") != std::string::npos;
    }
    expect(rejected, "keypoints_v2.sekp not rejected as unsupported version", failure);

    const MatchSet m2 = read_matches(data / "matches_2.semt");
    expect(m2.tau_a == 1000000 && m2.tau_b == 1033333 && m2.size() == 2 && m2.pairs[0] == Match{0, 1, 0.95f} &&
               m2.pairs[1] == Match{1, 0, 0.25f},
           "matches_2.semt values", failure);
    same_bytes(data / "matches_2.semt", encode_matches(m2));

    const Mcts mc = read_mcts(data / "mcts_2x1.mcts");
    expect(mc.width == 2 && mc.height == 1 && mc.tau_us == 5000 && mc.channel_count() == 4 &&
               mc.windows.seconds() == std::vector<double>{0.001, 0.01} && mc.channels[0](0, 1) == 0.5f &&
               mc.channels[1](0, 0) == 0.25f && mc.channels[3](0, 1) == 0.75f,
           "mcts_2x1.mcts values", failure);
    same_bytes(data / "mcts_2x1.mcts", encode_mcts(mc));

    for (const char* f : {"1000000.sekp", "1050000.sekp"})
      same_bytes(data / "toy_sequence" / f, encode_keypoints(read_keypoints(data / "toy_sequence" / f)));
    same_bytes(data / "toy_sequence" / "1000000_1050000.semt",
               encode_matches(read_matches(data / "toy_sequence" / "1000000_1050000.semt")));
  } catch (const std::exception& e) {
    expect(false, std::string("exception: ") + e.what(), failure);
  }
  c.passed = failure.empty();
  c.detail = c.passed ? std::to_string(cases) + " randomized fixtures per format; 9 golden files re-encode byte-for-byte, version-2 SEKP rejected"
                      : failure;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  fs::path data, work;
  app.add_option("--cli", cli, "Path to the evkp executable")->required()->check(CLI::ExistingFile);
  app.add_option("--data", data, "Golden fixture directory")->required()->check(CLI::ExistingDirectory);
  app.add_option("--work", work, "Scratch directory")->required();
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::function<Criterion()>> criteria = {
      mcts_oracle,
      decay_points,
      nms_oracle,
      loss_gradients,
      auc_oracle,
      pose_recovery,
      [&] { return bench_determinism(cli, work); },
      labelgen_oracle,
      [&] { return throughput(cli); },
      [&] { return format_round_trips(data); },
  };
  int failed = 0;
  int index = 0;
  for (const auto& criterion : criteria) {
    Criterion c;
    try {
      c = criterion();
    } catch (const std::exception& e) {
      c = {"criterion " + std::to_string(index + 1), false, std::string("exception: ") + e.what()};
    }
    ++index;
    failed += !c.passed;
    std::cout << (c.passed ? "PASS" : "FAIL") << " [" << index << "] " << c.name << ": " << c.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
