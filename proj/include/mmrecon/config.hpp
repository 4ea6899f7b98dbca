#pragma once

// Pipeline configuration and its TOML-style file form: `[section]` headers, `key = value`
// lines, `#` comments. Values are numbers, booleans, quoted strings or flat arrays.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mmrecon/error.hpp"
#include "mmrecon/grid.hpp"
#include "mmrecon/partial_synth.hpp"
#include "mmrecon/radar.hpp"
#include "mmrecon/selection.hpp"

namespace mmrecon {

namespace toml_lite {

using Scalar = std::variant<bool, double, std::string>;
using Value = std::variant<Scalar, std::vector<Scalar>>;
using Table = std::map<std::string, Value>;  // keys are "section.key"

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string format(const Scalar& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return quote(std::get<std::string>(v));
}

class Parser {
 public:
  Parser(std::string_view text, int line) : s_(text), line_(line) {}

  Value value() {
    skip_ws();
    if (peek() == '[') {
      ++pos_;
      std::vector<Scalar> items;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return items;
      }
      while (true) {
        items.push_back(scalar());
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          skip_ws();
          if (peek() == ']') break;
          continue;
        }
        break;
      }
      if (peek() != ']') error("expected ']'");
      ++pos_;
      return items;
    }
    return scalar();
  }

  void finish() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') error("trailing characters");
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::ConfigError, "line " + std::to_string(line_) + ": " + what);
  }

  Scalar scalar() {
    skip_ws();
    if (peek() == '"') {
      ++pos_;
      std::string out;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        char c = s_[pos_++];
        if (c == '\\') {
          if (pos_ >= s_.size()) error("dangling escape");
          c = s_[pos_++];
          if (c == 'n') c = '\n';
          else if (c != '"' && c != '\\') error("unsupported escape");
        }
        out += c;
      }
      if (peek() != '"') error("unterminated string");
      ++pos_;
      return out;
    }
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    const std::string token(s_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::string digits;
    for (char c : token) {
      if (c != '_') digits += c;
    }
    if (!digits.empty() && digits[0] == '+') digits.erase(0, 1);
    double v = 0.0;
    const auto r = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (digits.empty() || r.ec != std::errc() || r.ptr != digits.data() + digits.size()) error("bad value '" + token + "'");
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

inline Table parse(const std::string& text) {
  Table table;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s[0] == '[') {
      const auto close = s.find(']');
      if (close == std::string::npos) fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": unterminated section");
      section = trim(std::string_view(s).substr(1, close - 1));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (key.empty()) fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": empty key");
    Parser p(std::string_view(s).substr(eq + 1), line);
    Value v = p.value();
    p.finish();
    const std::string full = section.empty() ? key : section + "." + key;
    if (!table.emplace(full, std::move(v)).second) fail(ErrorCode::ConfigError, "duplicate key " + full);
  }
  return table;
}

}  // namespace toml_lite

/// Every tunable of a run. Angles are stored in degrees, as written in the file.
struct PipelineConfig {
  Waveform waveform;

  std::size_t array_nx = 16;
  std::size_t array_ny = 16;
  double array_width_x = 0.4;
  double array_width_y = 0.4;
  double array_height = 0.35;
  double array_center_x = 0.0;
  double array_center_y = 0.0;

  VoxelGridSpec grid = VoxelGridSpec::cube(Point3::Zero(), 64, 0.004);

  double tau_deg = 40.0;
  double tau_h_deg = 90.0;
  double tau_v_deg = 90.0;
  double noise_sigma = 0.010;
  double dropout_fraction = 0.0;
  std::array<double, 2> tau_range_deg{20.0, 60.0};
  std::array<double, 2> tau_h_range_deg{20.0, 90.0};
  std::array<double, 2> tau_v_range_deg{20.0, 90.0};
  std::size_t surface_points = 4096;

  double specular_sigma = 0.35;
  bool hidden_point_removal = true;
  double snr_db = std::numeric_limits<double>::infinity();  // inf: noiseless

  double threshold_percentile = 97.0;

  std::size_t num_candidates = 16;
  double delta = 0.0;  // 0: half the voxel spacing
  std::size_t reference_voxel = 0;
  std::size_t min_candidate_points = 10;

  std::string completer = "baseline";
  std::string exchange_dir;
  double exchange_timeout_s = 120.0;

  double uncertainty_threshold = 0.6;
  bool flag_at_or_below = true;

  double metric_threshold = 0.08;

  std::uint64_t seed = 0;

  SensorArray sensor_array() const {
    return SensorArray::planar(array_nx, array_ny, array_width_x, array_width_y, array_height, array_center_x, array_center_y);
  }

  VisibilityParams visibility() const {
    return {deg2rad(tau_deg), deg2rad(tau_h_deg), deg2rad(tau_v_deg), noise_sigma, dropout_fraction};
  }

  double effective_delta() const { return delta > 0.0 ? delta : grid.spacing / 2.0; }

  SelectionOptions selection() const { return {{uncertainty_threshold, flag_at_or_below}, specular_sigma}; }

  /// Throws ConfigError naming the first violated constraint.
  void validate() const {
    const auto check = [](bool ok, const char* what) {
      if (!ok) fail(ErrorCode::ConfigError, what);
    };
    check(waveform.valid(), "waveform: start_frequency and bandwidth must be > 0, num_samples >= 2");
    check(array_nx >= 1 && array_ny >= 1, "array: nx and ny must be >= 1");
    check(std::isfinite(array_height) && std::isfinite(array_width_x) && std::isfinite(array_width_y), "array: non-finite geometry");
    check(grid.valid(), "grid: spacing must be > 0 and dims >= 1");
    check(reference_voxel < grid.size(), "proposal.reference_voxel outside the grid");
    check(visibility().valid(), "visibility: angles in (0, 180], noise_sigma >= 0, dropout in [0, 1)");
    for (const auto* r : {&tau_range_deg, &tau_h_range_deg, &tau_v_range_deg}) {
      check((*r)[0] > 0.0 && (*r)[0] <= (*r)[1] && (*r)[1] <= 180.0, "visibility: ranges must satisfy 0 < lo <= hi <= 180");
    }
    check(surface_points >= 100, "data.surface_points must be >= 100");
    check(specular_sigma > 0.0, "simulation.specular_sigma must be > 0");
    check(!std::isnan(snr_db), "simulation.snr_db must not be nan");
    check(threshold_percentile >= 0.0 && threshold_percentile <= 100.0, "imaging.threshold_percentile must be in [0, 100]");
    check(num_candidates >= 1, "proposal.num_candidates must be >= 1");
    check(delta >= 0.0, "proposal.delta must be >= 0");
    check(completer == "baseline" || completer == "external", "completion.completer must be baseline or external");
    check(completer != "external" || !exchange_dir.empty(), "completion.exchange_dir is required for the external completer");
    check(exchange_timeout_s > 0.0, "completion.timeout_s must be > 0");
    check(uncertainty_threshold >= 0.0 && uncertainty_threshold <= 1.0, "selection.uncertainty_threshold must be in [0, 1]");
    check(metric_threshold > 0.0, "metrics.threshold must be > 0");
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(toml_lite::Table t) : table_(std::move(t)) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    const auto it = table_.find(key);
    if (it == table_.end()) return;
    const auto* scalar = std::get_if<toml_lite::Scalar>(&it->second);
    if (!scalar) fail(ErrorCode::ConfigError, key + ": expected a scalar");
    assign(key, *scalar, out);
    table_.erase(it);
  }

  template <typename T, std::size_t N>
  void get(const std::string& key, std::array<T, N>& out) {
    const auto it = table_.find(key);
    if (it == table_.end()) return;
    const auto* arr = std::get_if<std::vector<toml_lite::Scalar>>(&it->second);
    if (!arr || arr->size() != N) fail(ErrorCode::ConfigError, key + ": expected an array of " + std::to_string(N));
    for (std::size_t i = 0; i < N; ++i) assign(key, (*arr)[i], out[i]);
    table_.erase(it);
  }

  void get(const std::string& key, Point3& out) {
    std::array<double, 3> a{out.x(), out.y(), out.z()};
    get(key, a);
    out = Point3(a[0], a[1], a[2]);
  }

  void reject_leftovers() const {
    if (!table_.empty()) fail(ErrorCode::ConfigError, "unknown key " + table_.begin()->first);
  }

 private:
  static void assign(const std::string& key, const toml_lite::Scalar& v, bool& out) {
    const auto* b = std::get_if<bool>(&v);
    if (!b) fail(ErrorCode::ConfigError, key + ": expected true or false");
    out = *b;
  }
  static void assign(const std::string& key, const toml_lite::Scalar& v, double& out) {
    const auto* d = std::get_if<double>(&v);
    if (!d) fail(ErrorCode::ConfigError, key + ": expected a number");
    out = *d;
  }
  static void assign(const std::string& key, const toml_lite::Scalar& v, std::string& out) {
    const auto* s = std::get_if<std::string>(&v);
    if (!s) fail(ErrorCode::ConfigError, key + ": expected a string");
    out = *s;
  }
  template <typename T>
    requires std::is_unsigned_v<T>
  static void assign(const std::string& key, const toml_lite::Scalar& v, T& out) {
    const auto* d = std::get_if<double>(&v);
    if (!d || *d < 0 || *d != std::floor(*d) || *d > 9.007199254740992e15) {
      fail(ErrorCode::ConfigError, key + ": expected a non-negative integer");
    }
    out = static_cast<T>(*d);
  }

  toml_lite::Table table_;
};

}  // namespace detail

inline PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  detail::ConfigReader r(toml_lite::parse(text));
  r.get("waveform.start_frequency", c.waveform.start_frequency);
  r.get("waveform.bandwidth", c.waveform.bandwidth);
  r.get("waveform.num_samples", c.waveform.num_samples);
  r.get("array.nx", c.array_nx);
  r.get("array.ny", c.array_ny);
  r.get("array.width_x", c.array_width_x);
  r.get("array.width_y", c.array_width_y);
  r.get("array.height", c.array_height);
  r.get("array.center_x", c.array_center_x);
  r.get("array.center_y", c.array_center_y);
  r.get("grid.origin", c.grid.origin);
  r.get("grid.spacing", c.grid.spacing);
  r.get("grid.dims", c.grid.dims);
  r.get("visibility.tau_deg", c.tau_deg);
  r.get("visibility.tau_h_deg", c.tau_h_deg);
  r.get("visibility.tau_v_deg", c.tau_v_deg);
  r.get("visibility.noise_sigma", c.noise_sigma);
  r.get("visibility.dropout_fraction", c.dropout_fraction);
  r.get("visibility.tau_range_deg", c.tau_range_deg);
  r.get("visibility.tau_h_range_deg", c.tau_h_range_deg);
  r.get("visibility.tau_v_range_deg", c.tau_v_range_deg);
  r.get("data.surface_points", c.surface_points);
  r.get("data.seed", c.seed);
  r.get("simulation.specular_sigma", c.specular_sigma);
  r.get("simulation.hidden_point_removal", c.hidden_point_removal);
  r.get("simulation.snr_db", c.snr_db);
  r.get("imaging.threshold_percentile", c.threshold_percentile);
  r.get("proposal.num_candidates", c.num_candidates);
  r.get("proposal.delta", c.delta);
  r.get("proposal.reference_voxel", c.reference_voxel);
  r.get("proposal.min_candidate_points", c.min_candidate_points);
  r.get("completion.completer", c.completer);
  r.get("completion.exchange_dir", c.exchange_dir);
  r.get("completion.timeout_s", c.exchange_timeout_s);
  r.get("selection.uncertainty_threshold", c.uncertainty_threshold);
  r.get("selection.flag_at_or_below", c.flag_at_or_below);
  r.get("metrics.threshold", c.metric_threshold);
  r.reject_leftovers();
  c.validate();
  return c;
}

inline std::string format_config(const PipelineConfig& c) {
  using toml_lite::format;
  using toml_lite::format_double;
  const auto num = [](double v) { return format_double(v); };
  const auto uint = [](std::uint64_t v) { return std::to_string(v); };
  const auto arr = [](std::initializer_list<std::string> items) {
    std::string s = "[";
    bool first = true;
    for (const auto& i : items) {
      s += (first ? "" : ", ") + i;
      first = false;
    }
    return s + "]";
  };
  std::ostringstream o;
  o << "[waveform]\n"
    << "start_frequency = " << num(c.waveform.start_frequency) << "\n"
    << "bandwidth = " << num(c.waveform.bandwidth) << "\n"
    << "num_samples = " << uint(c.waveform.num_samples) << "\n\n"
    << "[array]\n"
    << "nx = " << uint(c.array_nx) << "\n"
    << "ny = " << uint(c.array_ny) << "\n"
    << "width_x = " << num(c.array_width_x) << "\n"
    << "width_y = " << num(c.array_width_y) << "\n"
    << "height = " << num(c.array_height) << "\n"
    << "center_x = " << num(c.array_center_x) << "\n"
    << "center_y = " << num(c.array_center_y) << "\n\n"
    << "[grid]\n"
    << "origin = " << arr({num(c.grid.origin.x()), num(c.grid.origin.y()), num(c.grid.origin.z())}) << "\n"
    << "spacing = " << num(c.grid.spacing) << "\n"
    << "dims = " << arr({uint(c.grid.dims[0]), uint(c.grid.dims[1]), uint(c.grid.dims[2])}) << "\n\n"
    << "[visibility]\n"
    << "tau_deg = " << num(c.tau_deg) << "\n"
    << "tau_h_deg = " << num(c.tau_h_deg) << "\n"
    << "tau_v_deg = " << num(c.tau_v_deg) << "\n"
    << "noise_sigma = " << num(c.noise_sigma) << "\n"
    << "dropout_fraction = " << num(c.dropout_fraction) << "\n"
    << "tau_range_deg = " << arr({num(c.tau_range_deg[0]), num(c.tau_range_deg[1])}) << "\n"
    << "tau_h_range_deg = " << arr({num(c.tau_h_range_deg[0]), num(c.tau_h_range_deg[1])}) << "\n"
    << "tau_v_range_deg = " << arr({num(c.tau_v_range_deg[0]), num(c.tau_v_range_deg[1])}) << "\n\n"
    << "[data]\n"
    << "surface_points = " << uint(c.surface_points) << "\n"
    << "seed = " << uint(c.seed) << "\n\n"
    << "[simulation]\n"
    << "specular_sigma = " << num(c.specular_sigma) << "\n"
    << "hidden_point_removal = " << format(c.hidden_point_removal) << "\n"
    << "snr_db = " << num(c.snr_db) << "\n\n"
    << "[imaging]\n"
    << "threshold_percentile = " << num(c.threshold_percentile) << "\n\n"
    << "[proposal]\n"
    << "num_candidates = " << uint(c.num_candidates) << "\n"
    << "delta = " << num(c.delta) << "\n"
    << "reference_voxel = " << uint(c.reference_voxel) << "\n"
    << "min_candidate_points = " << uint(c.min_candidate_points) << "\n\n"
    << "[completion]\n"
    << "completer = " << format(c.completer) << "\n"
    << "exchange_dir = " << format(c.exchange_dir) << "\n"
    << "timeout_s = " << num(c.exchange_timeout_s) << "\n\n"
    << "[selection]\n"
    << "uncertainty_threshold = " << num(c.uncertainty_threshold) << "\n"
    << "flag_at_or_below = " << format(c.flag_at_or_below) << "\n\n"
    << "[metrics]\n"
    << "threshold = " << num(c.metric_threshold) << "\n";
  return o.str();
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline void save_config(const PipelineConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << format_config(c);
}

}  // namespace mmrecon
