#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "evkp/detection.hpp"
#include "evkp/labelgen.hpp"
#include "evkp/losses.hpp"
#include "evkp/matching.hpp"
#include "evkp/posebench.hpp"
#include "evkp/representation.hpp"

namespace evkp {

/// Configuration problem; `key` names the offending dotted key when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::string key = {})
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

using TomlScalar = std::variant<bool, std::int64_t, double, std::string>;
using TomlValue = std::variant<bool, std::int64_t, double, std::string, std::vector<TomlScalar>>;

/// Flat view of a TOML document: dotted key -> value. Supports the subset the
/// run config needs: [table] / [a.b] headers, bare keys, strings, integers,
/// floats, booleans and single-line arrays of scalars.
std::map<std::string, TomlValue> parse_toml(std::string_view text);

struct RunConfig {
  TimeWindowSet windows;
  DetectionConfig detection;
  MatchConfig matching;
  LossConfig loss;
  LabelGenConfig labelgen;
  int label_width = 0;
  int label_height = 0;
  std::string exclude_file;
  BenchConfig bench;
  std::uint64_t refnet_seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Builds a RunConfig on top of the defaults; unknown keys and type errors
/// throw ConfigError.
RunConfig parse_run_config(std::string_view toml_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// The defaults rendered as a TOML document.
std::string default_config_toml();

}  // namespace evkp
