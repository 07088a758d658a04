#include "evkp/config.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"
#include "text_util.hpp"

namespace evkp {
namespace {

class TomlLine {
 public:
  TomlLine(std::string_view text, std::size_t line_no) : s_(text), line_(line_no) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() {
    skip_space();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  bool consume(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string key() {
    skip_space();
    const std::size_t start = pos_;
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        out += c;
        ++pos_;
      } else if (c == '.' && pos_ > start) {
        out += c;
        ++pos_;
      } else {
        break;
      }
    }
    if (out.empty() || out.back() == '.') fail("expected a bare key");
    return out;
  }

  TomlScalar scalar() {
    skip_space();
    if (pos_ >= s_.size()) fail("missing value");
    if (s_[pos_] == '"') return string();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
           s_[pos_] != '\t')
      ++pos_;
    std::string token(s_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::erase(token, '_');
    if (token.find_first_of(".eE") == std::string::npos || token.starts_with("0x")) {
      if (const auto v = detail::parse_number<std::int64_t>(token)) return *v;
    }
    if (const auto v = detail::parse_number<double>(token); v && std::isfinite(*v)) return *v;
    fail("cannot parse value '" + std::string(s_.substr(start, pos_ - start)) + "'");
  }

  TomlValue value() {
    if (!consume('[')) return std::visit([](auto v) -> TomlValue { return v; }, scalar());
    std::vector<TomlScalar> items;
    if (consume(']')) return items;
    while (true) {
      items.push_back(scalar());
      if (consume(']')) break;
      if (!consume(',')) fail("expected ',' or ']' in array");
      if (consume(']')) break;  // trailing comma
    }
    return items;
  }

 private:
  std::string string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string type_name(const TomlValue& v) {
  switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    default: return "array";
  }
}

double as_double(const std::string& key, const TomlValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("config key '" + key + "' must be a number, got " + type_name(v), key);
}

std::int64_t as_int(const std::string& key, const TomlValue& v, std::int64_t min) {
  const auto* i = std::get_if<std::int64_t>(&v);
  if (!i) throw ConfigError("config key '" + key + "' must be an integer, got " + type_name(v), key);
  if (*i < min) throw ConfigError("config key '" + key + "' must be >= " + std::to_string(min), key);
  return *i;
}

bool as_bool(const std::string& key, const TomlValue& v) {
  const auto* b = std::get_if<bool>(&v);
  if (!b) throw ConfigError("config key '" + key + "' must be a boolean, got " + type_name(v), key);
  return *b;
}

std::string as_string(const std::string& key, const TomlValue& v) {
  const auto* s = std::get_if<std::string>(&v);
  if (!s) throw ConfigError("config key '" + key + "' must be a string, got " + type_name(v), key);
  return *s;
}

std::vector<double> as_doubles(const std::string& key, const TomlValue& v) {
  const auto* a = std::get_if<std::vector<TomlScalar>>(&v);
  if (!a) throw ConfigError("config key '" + key + "' must be an array of numbers", key);
  std::vector<double> out;
  for (const TomlScalar& item : *a)
    out.push_back(as_double(key, std::visit([](auto x) -> TomlValue { return x; }, item)));
  return out;
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(std::string_view text) {
  std::map<std::string, TomlValue> values;
  std::string table;
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    TomlLine line(lines[n], n + 1);
    if (line.at_end()) continue;
    if (line.consume('[')) {
      if (line.consume('[')) line.fail("arrays of tables are not supported");
      table = line.key();
      if (!line.consume(']')) line.fail("expected ']' after table name");
      if (!line.at_end()) line.fail("unexpected text after table header");
      continue;
    }
    const std::string key = (table.empty() ? "" : table + ".") + line.key();
    if (!line.consume('=')) line.fail("expected '=' after key '" + key + "'");
    TomlValue value = line.value();
    if (!line.at_end()) line.fail("unexpected text after value of '" + key + "'");
    if (!values.emplace(key, std::move(value)).second) line.fail("duplicate key '" + key + "'");
  }
  return values;
}

RunConfig parse_run_config(std::string_view toml_text) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, const TomlValue&)>;
  const std::map<std::string, Setter> schema = {
      {"representation.windows", [&](auto& k, auto& v) {
         try {
           cfg.windows = TimeWindowSet(as_doubles(k, v));
         } catch (const InvalidArgument& e) {
           throw ConfigError("config key '" + k + "': " + e.what(), k);
         }
       }},
      {"detection.threshold", [&](auto& k, auto& v) {
         const double t = as_double(k, v);
         if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("config key '" + k + "' must lie in [0, 1]", k);
         if (std::holds_alternative<ScoreThreshold>(cfg.detection.mode))
           cfg.detection.mode = ScoreThreshold{static_cast<float>(t)};
       }},
      {"detection.nms_radius", [&](auto& k, auto& v) { cfg.detection.nms_radius = static_cast<int>(as_int(k, v, 1)); }},
      {"detection.top_k", [&](auto& k, auto& v) {
         const auto n = as_int(k, v, 0);
         if (n > 0) cfg.detection.mode = TopK{static_cast<std::size_t>(n)};
       }},
      {"matching.min_similarity", [&](auto& k, auto& v) { cfg.matching.min_similarity = static_cast<float>(as_double(k, v)); }},
      {"matching.mutual", [&](auto& k, auto& v) {
         cfg.matching.mode = as_bool(k, v) ? MatchMode::kMutual : MatchMode::kOneWay;
       }},
      {"loss.descriptor_weight", [&](auto& k, auto& v) { cfg.loss.descriptor_weight = as_double(k, v); }},
      {"loss.positive_weight", [&](auto& k, auto& v) { cfg.loss.positive_weight = as_double(k, v); }},
      {"loss.positive_margin", [&](auto& k, auto& v) { cfg.loss.positive_margin = as_double(k, v); }},
      {"loss.negative_margin", [&](auto& k, auto& v) { cfg.loss.negative_margin = as_double(k, v); }},
      {"labelgen.median_threshold", [&](auto& k, auto& v) { cfg.labelgen.median_threshold_px = as_double(k, v); }},
      {"labelgen.min_matches", [&](auto& k, auto& v) { cfg.labelgen.min_matches = static_cast<std::size_t>(as_int(k, v, 1)); }},
      {"labelgen.max_step", [&](auto& k, auto& v) { cfg.labelgen.max_step = static_cast<int>(as_int(k, v, 1)); }},
      {"labelgen.seed", [&](auto& k, auto& v) { cfg.labelgen.seed = static_cast<std::uint64_t>(as_int(k, v, 0)); }},
      {"labelgen.width", [&](auto& k, auto& v) { cfg.label_width = static_cast<int>(as_int(k, v, 0)); }},
      {"labelgen.height", [&](auto& k, auto& v) { cfg.label_height = static_cast<int>(as_int(k, v, 0)); }},
      {"labelgen.exclude", [&](auto& k, auto& v) { cfg.exclude_file = as_string(k, v); }},
      {"bench.max_rotation_deg", [&](auto& k, auto& v) { cfg.bench.max_rotation_deg = as_double(k, v); }},
      {"bench.max_interval_s", [&](auto& k, auto& v) { cfg.bench.max_interval_s = as_double(k, v); }},
      {"bench.buckets", [&](auto& k, auto& v) { cfg.bench.buckets = static_cast<int>(as_int(k, v, 1)); }},
      {"bench.auc_thresholds", [&](auto& k, auto& v) { cfg.bench.auc_thresholds_deg = as_doubles(k, v); }},
      {"bench.ransac.iterations", [&](auto& k, auto& v) { cfg.bench.ransac.iterations = static_cast<int>(as_int(k, v, 1)); }},
      {"bench.ransac.threshold_px", [&](auto& k, auto& v) { cfg.bench.ransac.threshold_px = as_double(k, v); }},
      {"bench.ransac.seed", [&](auto& k, auto& v) { cfg.bench.ransac.seed = static_cast<std::uint64_t>(as_int(k, v, 0)); }},
      {"refnet.seed", [&](auto& k, auto& v) { cfg.refnet_seed = static_cast<std::uint64_t>(as_int(k, v, 0)); }},
      {"run.threads", [&](auto& k, auto& v) { cfg.threads = static_cast<unsigned>(as_int(k, v, 0)); }},
  };

  const auto values = parse_toml(toml_text);
  // top_k switches the detection mode, so apply it before threshold.
  if (const auto it = values.find("detection.top_k"); it != values.end()) schema.at(it->first)(it->first, it->second);
  for (const auto& [key, value] : values) {
    const auto it = schema.find(key);
    if (it == schema.end()) throw ConfigError("unknown config key '" + key + "'", key);
    if (key != "detection.top_k") it->second(key, value);
  }

  const auto check = [](const char* section, const auto& validate) {
    try {
      validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config [") + section + "]: " + e.what(), section);
    }
  };
  check("loss", [&] { cfg.loss.validate(); });
  check("labelgen", [&] { cfg.labelgen.validate(); });
  check("bench", [&] { cfg.bench.validate(); });
  if (!(cfg.matching.min_similarity >= -1.0f && cfg.matching.min_similarity <= 1.0f))
    throw ConfigError("config key 'matching.min_similarity' must lie in [-1, 1]", "matching.min_similarity");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::string default_config_toml() {
  return R"([representation]
windows = [0.001, 0.003, 0.01, 0.03, 0.1]

[detection]
threshold = 0.01
nms_radius = 2
top_k = 0

[matching]
min_similarity = 0.2
mutual = true

[loss]
descriptor_weight = 10.0
positive_weight = 0.5
positive_margin = 1.0
negative_margin = 0.2

[labelgen]
median_threshold = 1.0
min_matches = 50
max_step = 5
seed = 0
width = 0
height = 0

[bench]
max_rotation_deg = 45.0
max_interval_s = 2.0
buckets = 45
auc_thresholds = [5.0, 10.0, 20.0]

[bench.ransac]
iterations = 2000
threshold_px = 1.0
seed = 0

[refnet]
seed = 0

[run]
threads = 0
)";
}

}  // namespace evkp
