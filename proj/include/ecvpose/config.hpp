#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ecvpose/descriptor.hpp"
#include "ecvpose/error.hpp"
#include "ecvpose/evaluation.hpp"
#include "ecvpose/extract.hpp"
#include "ecvpose/icp.hpp"
#include "ecvpose/io.hpp"
#include "ecvpose/matching.hpp"
#include "ecvpose/ransac.hpp"

namespace ecvpose {

/// All configuration keys, in file order (used by the CLI to mirror every
/// key as a --key flag).
inline constexpr const char* kConfigKeys[] = {
    "threads",          "wavelength",     "bandwidth_octaves",
    "cell_diameter",    "keypoint_threshold", "tau_m",
    "tau_o",            "normal_radius",  "descriptor_radius",
    "min_neighbors",    "same_kind_only", "lowe_ratio",
    "sample_size",      "t_poly",         "inlier_dist",
    "min_inlier_fraction", "iterations",  "p",
    "w",                "convergence_error", "prefilter",
    "seed",             "icp_max_iterations", "icp_reject_dist",
    "icp_convergence_delta", "eval_threshold", "eval_aligner",
    "color_offset",
};

/// Every tunable of the pipeline as a flat key=value configuration. Unknown
/// keys are rejected; values are checked against the owning module's
/// preconditions when the config is validated.
struct PipelineConfig {
  int threads = 0;  // 0 = hardware concurrency

  // extraction
  double wavelength = 8.0;
  double bandwidth_octaves = 2.0;
  double cell_diameter = 7.0;
  double keypoint_threshold = 0.1;
  double tau_m = 0.1;
  double tau_o = 0.3;
  double normal_radius = 0.02;

  // descriptors
  double descriptor_radius = 0.025;
  int min_neighbors = 5;

  // matching
  bool same_kind_only = true;
  double lowe_ratio = 0.0;

  // consensus registration
  int sample_size = 3;
  double t_poly = 0.25;
  double inlier_dist = 0.01;
  double min_inlier_fraction = 0.5;
  std::int64_t iterations = 0;
  double p = 0.99;
  double w = 0.05;
  double convergence_error = 0.0;
  bool prefilter = true;
  std::uint64_t seed = 0;

  // icp
  int icp_max_iterations = 50;
  double icp_reject_dist = 0.05;
  double icp_convergence_delta = 1e-6;

  // evaluation
  double eval_threshold = 0.01;
  std::string eval_aligner = "ransac+icp";  // icp | ransac | ransac+icp

  // color calibration
  bool color_offset = false;

  ExtractParams extract_params() const {
    ExtractParams e;
    e.monogenic.wavelength = wavelength;
    e.monogenic.bandwidth_octaves = bandwidth_octaves;
    e.hex_diameter = cell_diameter;
    e.magnitude_threshold = keypoint_threshold;
    e.classify.tau_m = tau_m;
    e.classify.tau_o = tau_o;
    e.normal_radius = normal_radius;
    return e;
  }

  DescriptorParams descriptor_params() const {
    DescriptorParams d;
    d.radius = descriptor_radius;
    d.min_neighbors = min_neighbors;
    d.threads = threads;
    return d;
  }

  MatchParams match_params() const {
    MatchParams m;
    m.same_kind_only = same_kind_only;
    m.lowe_ratio = lowe_ratio;
    m.threads = threads;
    return m;
  }

  RansacConfig ransac_config() const {
    RansacConfig r;
    r.sample_size = sample_size;
    r.t_poly = t_poly;
    r.inlier_dist = inlier_dist;
    r.min_inlier_fraction = min_inlier_fraction;
    r.iterations = iterations;
    r.p = p;
    r.w = w;
    r.convergence_error = convergence_error;
    r.prefilter_enabled = prefilter;
    r.rng_seed = seed;
    return r;
  }

  IcpConfig icp_config() const {
    IcpConfig c;
    c.max_iterations = icp_max_iterations;
    c.reject_dist = icp_reject_dist;
    c.convergence_delta = icp_convergence_delta;
    return c;
  }

  Aligner aligner() const {
    if (eval_aligner == "icp") return Aligner::Icp;
    if (eval_aligner == "ransac") return Aligner::Ransac;
    if (eval_aligner == "ransac+icp") return Aligner::RansacIcp;
    throw Error(ErrorCode::InvalidConfig,
                "eval_aligner must be icp, ransac, or ransac+icp (got '" + eval_aligner + "')");
  }

  ScoreParams score_params() const {
    ScoreParams s;
    s.threshold = eval_threshold;
    s.aligner = aligner();
    s.descriptor = descriptor_params();
    s.match = match_params();
    s.ransac = ransac_config();
    s.icp = icp_config();
    return s;
  }

  /// Check every value against the owning module's preconditions.
  void validate() const {
    auto require = [](bool ok, const char* message) {
      if (!ok) throw Error(ErrorCode::InvalidConfig, message);
    };
    require(threads >= 0, "threads must be >= 0");
    require(wavelength >= 2.0, "wavelength must be >= 2 pixels");
    require(bandwidth_octaves > 0.0, "bandwidth_octaves must be positive");
    require(cell_diameter >= 3.0, "cell_diameter must be >= 3 pixels");
    require(keypoint_threshold >= 0.0 && keypoint_threshold <= 1.0,
            "keypoint_threshold must lie in [0,1]");
    require(tau_m >= 0.0 && tau_m <= 1.0, "tau_m must lie in [0,1]");
    require(tau_o >= 0.0 && tau_o <= 1.0, "tau_o must lie in [0,1]");
    require(normal_radius > 0.0, "normal_radius must be positive");
    require(descriptor_radius > 0.0, "descriptor_radius must be positive");
    require(min_neighbors >= 2, "min_neighbors must be >= 2");
    require(lowe_ratio >= 0.0 && lowe_ratio <= 1.0, "lowe_ratio must lie in [0,1]");
    require(eval_threshold > 0.0, "eval_threshold must be positive");
    try {
      ransac_config().validate();
      icp_config().validate();
      aligner();
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
  }

  /// Apply one key=value assignment; unknown keys and malformed values throw.
  void set(const std::string& key, const std::string& value);

  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;
};

namespace detail {

inline double config_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size())
    throw Error(ErrorCode::InvalidConfig, "key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

inline std::int64_t config_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size())
    throw Error(ErrorCode::InvalidConfig,
                "key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

inline bool config_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw Error(ErrorCode::InvalidConfig, "key '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
  using detail::config_bool;
  using detail::config_double;
  using detail::config_int;
  if (key == "threads") threads = int(config_int(key, value));
  else if (key == "wavelength") wavelength = config_double(key, value);
  else if (key == "bandwidth_octaves") bandwidth_octaves = config_double(key, value);
  else if (key == "cell_diameter") cell_diameter = config_double(key, value);
  else if (key == "keypoint_threshold") keypoint_threshold = config_double(key, value);
  else if (key == "tau_m") tau_m = config_double(key, value);
  else if (key == "tau_o") tau_o = config_double(key, value);
  else if (key == "normal_radius") normal_radius = config_double(key, value);
  else if (key == "descriptor_radius") descriptor_radius = config_double(key, value);
  else if (key == "min_neighbors") min_neighbors = int(config_int(key, value));
  else if (key == "same_kind_only") same_kind_only = config_bool(key, value);
  else if (key == "lowe_ratio") lowe_ratio = config_double(key, value);
  else if (key == "sample_size") sample_size = int(config_int(key, value));
  else if (key == "t_poly") t_poly = config_double(key, value);
  else if (key == "inlier_dist") inlier_dist = config_double(key, value);
  else if (key == "min_inlier_fraction") min_inlier_fraction = config_double(key, value);
  else if (key == "iterations") iterations = config_int(key, value);
  else if (key == "p") p = config_double(key, value);
  else if (key == "w") w = config_double(key, value);
  else if (key == "convergence_error") convergence_error = config_double(key, value);
  else if (key == "prefilter") prefilter = config_bool(key, value);
  else if (key == "seed") seed = std::uint64_t(config_int(key, value));
  else if (key == "icp_max_iterations") icp_max_iterations = int(config_int(key, value));
  else if (key == "icp_reject_dist") icp_reject_dist = config_double(key, value);
  else if (key == "icp_convergence_delta") icp_convergence_delta = config_double(key, value);
  else if (key == "eval_threshold") eval_threshold = config_double(key, value);
  else if (key == "eval_aligner") eval_aligner = value;
  else if (key == "color_offset") color_offset = config_bool(key, value);
  else
    throw Error(ErrorCode::InvalidConfig, "unknown configuration key '" + key + "'");
}

inline PipelineConfig PipelineConfig::load(const std::string& path) {
  const std::string content = detail::read_file(path, false);
  PipelineConfig cfg;
  size_t start = 0;
  int line_no = 0;
  while (start <= content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto strip = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = strip(line);
    if (line.empty()) {
      if (end == content.size()) break;
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidConfig,
                  path + ":" + std::to_string(line_no) + ": expected key = value");
    cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    if (end == content.size()) break;
  }
  cfg.validate();
  return cfg;
}

inline void PipelineConfig::save(const std::string& path) const {
  std::ostringstream out;
  const auto d = [](double v) { return detail::format_double(v); };
  out << "threads = " << threads << "\n"
      << "wavelength = " << d(wavelength) << "\n"
      << "bandwidth_octaves = " << d(bandwidth_octaves) << "\n"
      << "cell_diameter = " << d(cell_diameter) << "\n"
      << "keypoint_threshold = " << d(keypoint_threshold) << "\n"
      << "tau_m = " << d(tau_m) << "\n"
      << "tau_o = " << d(tau_o) << "\n"
      << "normal_radius = " << d(normal_radius) << "\n"
      << "descriptor_radius = " << d(descriptor_radius) << "\n"
      << "min_neighbors = " << min_neighbors << "\n"
      << "same_kind_only = " << (same_kind_only ? 1 : 0) << "\n"
      << "lowe_ratio = " << d(lowe_ratio) << "\n"
      << "sample_size = " << sample_size << "\n"
      << "t_poly = " << d(t_poly) << "\n"
      << "inlier_dist = " << d(inlier_dist) << "\n"
      << "min_inlier_fraction = " << d(min_inlier_fraction) << "\n"
      << "iterations = " << iterations << "\n"
      << "p = " << d(p) << "\n"
      << "w = " << d(w) << "\n"
      << "convergence_error = " << d(convergence_error) << "\n"
      << "prefilter = " << (prefilter ? 1 : 0) << "\n"
      << "seed = " << seed << "\n"
      << "icp_max_iterations = " << icp_max_iterations << "\n"
      << "icp_reject_dist = " << d(icp_reject_dist) << "\n"
      << "icp_convergence_delta = " << d(icp_convergence_delta) << "\n"
      << "eval_threshold = " << d(eval_threshold) << "\n"
      << "eval_aligner = " << eval_aligner << "\n"
      << "color_offset = " << (color_offset ? 1 : 0) << "\n";
  detail::write_file(path, out.str(), false);
}

}  // namespace ecvpose
