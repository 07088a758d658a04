// evkp: batch front end for time-surface building, label generation,
// matching and the relative-pose benchmark.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evkp/binary.hpp"
#include "evkp/config.hpp"
#include "evkp/error.hpp"
#include "evkp/event_io.hpp"
#include "evkp/labelgen.hpp"
#include "evkp/matching.hpp"
#include "evkp/parallel.hpp"
#include "evkp/posebench.hpp"
#include "evkp/refnet.hpp"
#include "evkp/representation.hpp"
#include "evkp/selfcheck.hpp"
#include "evkp/synthetic.hpp"

namespace fs = std::filesystem;
using namespace evkp;

namespace {

/// Bad invocation: reported like a config error (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load_config(const std::string& path) {
  return path.empty() ? parse_run_config("") : load_run_config(path);
}

EventFormat event_format(const fs::path& path, const std::string& forced) {
  const std::string choice = forced.empty() ? path.extension().string() : "." + forced;
  if (choice == ".csv" || choice == ".txt") return EventFormat::kCsv;
  if (choice == ".evt1" || choice == ".evt" || choice == ".bin") return EventFormat::kEvt1;
  throw UsageError("cannot tell the event format of '" + path.string() + "'; pass --format csv|evt1");
}

std::vector<std::uint64_t> parse_timestamps(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-')
      throw UsageError("--at expects comma-separated microsecond timestamps, got '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--at needs at least one timestamp");
  return out;
}

struct MctsArgs {
  std::string events, at, out, config, format;
  std::uint16_t width = 0, height = 0;
};

int run_mcts_build(const MctsArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const std::vector<std::uint64_t> taus = parse_timestamps(a.at);
  EventReadOptions options;
  options.width = a.width;
  options.height = a.height;
  const EventStream stream = read_events(a.events, event_format(a.events, a.format), options);
  fs::create_directories(a.out);
  for (std::uint64_t tau : taus) {
    const auto end = std::upper_bound(stream.events.begin(), stream.events.end(), tau,
                                      [](std::uint64_t t, const Event& e) { return t < e.t; });
    ActiveEventSurface surface(stream.width, stream.height);
    surface.ingest(std::span<const Event>(stream.events.begin(), end));
    const fs::path file = fs::path(a.out) / (std::to_string(tau) + ".mcts");
    write_mcts(mcts_from_aes(surface, tau, cfg.windows), file);
    std::cout << "wrote " << file.string() << "\n";
  }
  return 0;
}

struct LabelArgs {
  std::string frames, config, out, exclude;
  std::optional<std::uint64_t> seed;
  std::optional<int> width, height;
};

int run_labels_generate(const LabelArgs& a) {
  const RunConfig cfg = load_config(a.config);
  LabelRunOptions options;
  options.config = cfg.labelgen;
  options.matching = cfg.matching;
  options.width = a.width.value_or(cfg.label_width);
  options.height = a.height.value_or(cfg.label_height);
  if (a.seed) options.config.seed = *a.seed;
  std::string exclude = a.exclude.empty() ? cfg.exclude_file : a.exclude;
  if (!exclude.empty()) {
    fs::path p = exclude;
    if (p.is_relative() && a.exclude.empty() && !a.config.empty()) p = fs::path(a.config).parent_path() / p;
    options.excluded = read_exclusion_list(p);
  }
  const LabelRunSummary summary = generate_label_manifest(a.frames, a.out, options);
  std::cout << "sequences=" << summary.sequences << " excluded=" << summary.excluded << " pairs=" << summary.pairs
            << "\n";
  return 0;
}

struct MatchArgs {
  std::string a, b, out, config;
  std::optional<float> min_sim;
  bool one_way = false;
};

int run_match(const MatchArgs& m) {
  const RunConfig cfg = load_config(m.config);
  MatchConfig mc = cfg.matching;
  if (m.min_sim) mc.min_similarity = *m.min_sim;
  if (m.one_way) mc.mode = MatchMode::kOneWay;
  const KeypointSet a = read_keypoints(m.a);
  const KeypointSet b = read_keypoints(m.b);
  const MatchSet matches = match_descriptors(a, b, mc);
  const fs::path out = m.out.empty() ? fs::path(std::to_string(a.tau_us) + "_" + std::to_string(b.tau_us) + ".semt")
                                     : fs::path(m.out);
  write_matches(matches, out);
  double mean = 0.0;
  for (const Match& x : matches.pairs) mean += x.similarity;
  if (!matches.pairs.empty()) mean /= static_cast<double>(matches.size());
  char line[256];
  std::snprintf(line, sizeof line, "keypoints_a=%zu keypoints_b=%zu matches=%zu mean_similarity=%.6f out=%s\n",
                a.size(), b.size(), matches.size(), mean, out.string().c_str());
  std::cout << line;
  return 0;
}

struct BenchArgs {
  std::string trajectory, predictions, mcts, events, intrinsics, config, out, format;
  bool refnet = false;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

int run_bench_pose(const BenchArgs& a) {
  const RunConfig cfg = load_config(a.config);
  BenchConfig bench = cfg.bench;
  if (a.seed) bench.ransac.seed = *a.seed;

  std::unique_ptr<PredictionProvider> provider;
  if (a.refnet) {
    if (a.mcts.empty() == a.events.empty()) throw UsageError("--refnet needs exactly one of --mcts or --events");
    if (!a.predictions.empty()) throw UsageError("--predictions and --refnet are mutually exclusive");
    if (!a.mcts.empty()) {
      provider = std::make_unique<RefNetPredictionProvider>(a.mcts, cfg.detection, cfg.refnet_seed);
    } else {
      EventStream stream = read_events(a.events, event_format(a.events, a.format));
      provider = std::make_unique<RefNetPredictionProvider>(std::move(stream), cfg.windows, cfg.detection,
                                                            cfg.refnet_seed);
    }
  } else {
    if (a.predictions.empty()) throw UsageError("one of --predictions or --refnet is required");
    provider = std::make_unique<DirectoryPredictionProvider>(a.predictions);
  }

  const Trajectory trajectory = read_trajectory(a.trajectory);
  const CameraIntrinsics intrinsics = read_intrinsics(a.intrinsics);
  const unsigned threads = resolve_thread_count(a.threads.value_or(cfg.threads));
  const BenchmarkReport report = run_benchmark(trajectory, *provider, intrinsics, bench, threads);
  write_report(report, a.out);

  std::cout << "samples=" << report.samples.size() << " evaluated=" << report.evaluated
            << " failures=" << report.failures << " skipped=" << report.skipped;
  for (const auto& [threshold, value] : report.auc) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " auc@%g=%.6f", threshold, value);
    std::cout << buf;
  }
  std::cout << "\n";
  return 0;
}

int run_selftest(bool bench, std::uint64_t seed) {
  bool ok = true;
  for (const CheckResult& r : run_oracle_suites(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  if (bench) {
    const ThroughputResult t = measure_throughput();
    const bool ingest_ok = t.events_per_second >= kMinEventsPerSecond;
    const bool mat_ok = t.ms_per_materialization >= 0.0 && t.ms_per_materialization <= kMaxMaterializationMs;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s throughput: ingestion %.3g events/s (need >= %.3g)\n",
                  ingest_ok ? "PASS" : "FAIL", t.events_per_second, kMinEventsPerSecond);
    std::cout << buf;
    std::snprintf(buf, sizeof buf, "%s throughput: 640x480 10-channel materialization %.3f ms (need <= %.1f)\n",
                  mat_ok ? "PASS" : "FAIL", t.ms_per_materialization, kMaxMaterializationMs);
    std::cout << buf;
    ok = ok && ingest_ok && mat_ok;
  }
  if (!ok) std::cerr << "error: selftest failed\n";
  return ok ? 0 : 1;
}

int run_synth_pose(const std::string& out, std::uint64_t seed) {
  SyntheticBenchConfig config;
  config.seed = seed;
  write_synthetic_bench(make_synthetic_bench(config), out);
  std::string toml = default_config_toml();
  const std::string from = "iterations = 2000";
  toml.replace(toml.find(from), from.size(), "iterations = 200");
  write_file_text(fs::path(out) / "config.toml", toml);
  std::cout << "wrote synthetic benchmark fixture to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evkp: event-camera keypoint toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "evkp 1.0.0");

  MctsArgs mcts_args;
  auto* mcts = app.add_subcommand("mcts", "Multi-channel time surfaces");
  mcts->require_subcommand(1);
  auto* mcts_build = mcts->add_subcommand("build", "Write MCTS containers at the given timestamps");
  mcts_build->add_option("--events", mcts_args.events, "Event file (.csv or .evt1)")->required()->check(CLI::ExistingFile);
  mcts_build->add_option("--at", mcts_args.at, "Comma-separated timestamps in microseconds")->required();
  mcts_build->add_option("--out", mcts_args.out, "Output directory, one <tau>.mcts per timestamp")->required();
  mcts_build->add_option("--config", mcts_args.config, "TOML run config ([representation] windows)")
      ->check(CLI::ExistingFile);
  mcts_build->add_option("--format", mcts_args.format, "Force the event format")->check(CLI::IsMember({"csv", "evt1"}));
  mcts_build->add_option("--width", mcts_args.width, "Sensor width for CSV input (default: max x + 1)");
  mcts_build->add_option("--height", mcts_args.height, "Sensor height for CSV input (default: max y + 1)");

  LabelArgs label_args;
  auto* labels = app.add_subcommand("labels", "Pseudo-label generation");
  labels->require_subcommand(1);
  auto* labels_gen = labels->add_subcommand("generate", "Temporal-matching pairs from SEKP frame sequences");
  labels_gen->add_option("--frames", label_args.frames, "Sequence directory, or a root of sequence directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  labels_gen->add_option("--config", label_args.config, "TOML run config ([labelgen], [matching])")
      ->check(CLI::ExistingFile);
  labels_gen->add_option("--out", label_args.out, "Output directory for manifest.jsonl, matches/, targets/")
      ->required();
  labels_gen->add_option("--seed", label_args.seed, "Overrides labelgen.seed");
  labels_gen->add_option("--width", label_args.width, "Overrides labelgen.width (sensor width in pixels)");
  labels_gen->add_option("--height", label_args.height, "Overrides labelgen.height (sensor height in pixels)");
  labels_gen->add_option("--exclude", label_args.exclude, "File listing sequence names to skip");

  MatchArgs match_args;
  auto* match = app.add_subcommand("match", "Match two SEKP files and write an SEMT file");
  match->add_option("--a", match_args.a, "First keypoint file")->required()->check(CLI::ExistingFile);
  match->add_option("--b", match_args.b, "Second keypoint file")->required()->check(CLI::ExistingFile);
  match->add_option("--min-sim", match_args.min_sim, "Minimum dot-product similarity (default 0.2)");
  match->add_flag("--one-way", match_args.one_way, "Keep every nearest neighbour of A, not only mutual ones");
  match->add_option("--out", match_args.out, "Output SEMT path (default <tauA>_<tauB>.semt)");
  match->add_option("--config", match_args.config, "TOML run config ([matching])")->check(CLI::ExistingFile);

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto* pose = bench->add_subcommand("pose", "Relative-pose AUC benchmark");
  pose->add_option("--trajectory", bench_args.trajectory, "TUM trajectory (t tx ty tz qx qy qz qw)")
      ->required()
      ->check(CLI::ExistingFile);
  pose->add_option("--predictions", bench_args.predictions, "Directory of SEKP files keyed by timestamp")
      ->check(CLI::ExistingDirectory);
  pose->add_flag("--refnet", bench_args.refnet, "Predict with the reference network instead of SEKP files");
  pose->add_option("--mcts", bench_args.mcts, "With --refnet: directory of MCTS containers")
      ->check(CLI::ExistingDirectory);
  pose->add_option("--events", bench_args.events, "With --refnet: event file to build MCTS from")
      ->check(CLI::ExistingFile);
  pose->add_option("--format", bench_args.format, "Force the event format")->check(CLI::IsMember({"csv", "evt1"}));
  pose->add_option("--intrinsics", bench_args.intrinsics, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  pose->add_option("--config", bench_args.config, "TOML run config ([bench], [matching], [detection])")
      ->check(CLI::ExistingFile);
  pose->add_option("--out", bench_args.out, "Report directory (samples.csv, summary.json, curve.csv)")->required();
  pose->add_option("--threads", bench_args.threads, "Worker threads (0 = all cores; capped by SUPEREVENT_THREADS)");
  pose->add_option("--seed", bench_args.seed, "Overrides bench.ransac.seed");

  bool selftest_bench = false;
  std::uint64_t selftest_seed = 0;
  auto* selftest = app.add_subcommand("selftest", "Run the brute-force oracle suites");
  selftest->add_flag("--bench", selftest_bench, "Also measure AES ingestion and MCTS materialization throughput");
  selftest->add_option("--seed", selftest_seed, "Seed of the randomized cases");

  std::string synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Synthetic fixtures");
  synth->require_subcommand(1);
  auto* synth_pose = synth->add_subcommand("pose", "Write a synthetic pose benchmark fixture");
  synth_pose->add_option("--out", synth_out, "Output directory")->required();
  synth_pose->add_option("--seed", synth_seed, "Scene seed");

  auto* config = app.add_subcommand("config", "Run configuration");
  config->require_subcommand(1);
  auto* config_defaults = config->add_subcommand("defaults", "Print the default config as TOML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (mcts_build->parsed()) return run_mcts_build(mcts_args);
    if (labels_gen->parsed()) return run_labels_generate(label_args);
    if (match->parsed()) return run_match(match_args);
    if (pose->parsed()) return run_bench_pose(bench_args);
    if (selftest->parsed()) return run_selftest(selftest_bench, selftest_seed);
    if (synth_pose->parsed()) return run_synth_pose(synth_out, synth_seed);
    if (config_defaults->parsed()) {
      std::cout << default_config_toml();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
