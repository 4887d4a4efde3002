#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecvpose/color.hpp"
#include "ecvpose/descriptor.hpp"
#include "ecvpose/error.hpp"
#include "ecvpose/evaluation.hpp"
#include "ecvpose/extract.hpp"
#include "ecvpose/frame.hpp"
#include "ecvpose/geometry.hpp"
#include "ecvpose/icp.hpp"
#include "ecvpose/matching.hpp"
#include "ecvpose/ransac.hpp"

namespace ecvpose {
namespace detail {

/// Full-precision decimal rendering (doubles survive a write/read cycle).
inline std::string format_double(double v, int significant_digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, v);
  return buf;
}

inline double parse_double_12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

/// Whitespace-token scanner with line tracking for parse diagnostics.
class TextScanner {
 public:
  TextScanner(std::string content, std::string origin)
      : content_(std::move(content)), origin_(std::move(origin)) {}

  bool at_end() {
    skip_space();
    return pos_ >= content_.size();
  }

  std::string next_token(const char* what) {
    skip_space();
    if (pos_ >= content_.size()) fail(std::string("unexpected end of file, expected ") + what);
    const size_t start = pos_;
    while (pos_ < content_.size() && !std::isspace(static_cast<unsigned char>(content_[pos_])))
      ++pos_;
    return content_.substr(start, pos_ - start);
  }

  double next_double(const char* what) {
    const std::string tok = next_token(what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
      fail(std::string("expected a number for ") + what + ", got '" + tok + "'");
    return v;
  }

  long long next_int(const char* what) {
    const std::string tok = next_token(what);
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size())
      fail(std::string("expected an integer for ") + what + ", got '" + tok + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& message) {
    throw Error(ErrorCode::ParseError,
                origin_ + ":" + std::to_string(line_) + ": " + message);
  }

  int line() const { return line_; }

 private:
  void skip_space() {
    while (pos_ < content_.size() && std::isspace(static_cast<unsigned char>(content_[pos_]))) {
      if (content_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string content_;
  std::string origin_;
  size_t pos_ = 0;
  int line_ = 1;
};

inline std::string read_file(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::ParseError, "cannot open '" + path + "' for writing");
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw Error(ErrorCode::ParseError, "failed writing '" + path + "'");
}

inline void check_magic(TextScanner& scanner, const char* magic) {
  const std::string found = scanner.next_token("format magic");
  if (found != magic)
    scanner.fail(std::string("expected magic '") + magic + "', got '" + found + "'");
  const long long version = scanner.next_int("format version");
  if (version != 1)
    throw Error(ErrorCode::VersionMismatch,
                std::string(magic) + " version " + std::to_string(version) + " is not supported");
}

}  // namespace detail

// --- RGB-D frames: text header, binary body (RGB bytes + float32 depth) ----

inline void save_frame(const std::string& path, const RgbdFrame& frame) {
  frame.validate();
  std::string out;
  {
    std::ostringstream header;
    header << "ECVF 1\n" << frame.width << " " << frame.height << "\n"
           << detail::format_double(frame.intrinsics.fx) << " "
           << detail::format_double(frame.intrinsics.fy) << " "
           << detail::format_double(frame.intrinsics.cx) << " "
           << detail::format_double(frame.intrinsics.cy) << "\n";
    out = header.str();
  }
  const size_t pixels = size_t(frame.width) * size_t(frame.height);
  out.reserve(out.size() + pixels * (3 + sizeof(float)));
  for (size_t i = 0; i < pixels; ++i)
    for (int ch = 0; ch < 3; ++ch) {
      const double c = std::clamp(frame.rgb[i](ch), 0.0, 1.0);
      out.push_back(char(static_cast<unsigned char>(std::lround(c * 255.0))));
    }
  for (size_t i = 0; i < pixels; ++i) {
    const float depth = float(frame.depth[i]);
    char bytes[sizeof(float)];
    std::memcpy(bytes, &depth, sizeof(float));
    out.append(bytes, sizeof(float));
  }
  detail::write_file(path, out, /*binary=*/true);
}

inline RgbdFrame load_frame(const std::string& path) {
  const std::string content = detail::read_file(path, /*binary=*/true);

  // Header = first three newline-terminated lines; body follows verbatim.
  size_t body_start = 0;
  int newlines = 0;
  while (body_start < content.size() && newlines < 3)
    if (content[body_start++] == '\n') ++newlines;
  if (newlines < 3)
    throw Error(ErrorCode::ParseError, path + ": truncated header");

  detail::TextScanner scanner(content.substr(0, body_start), path);
  detail::check_magic(scanner, "ECVF");
  RgbdFrame frame;
  frame.width = int(scanner.next_int("width"));
  frame.height = int(scanner.next_int("height"));
  if (frame.width <= 0 || frame.height <= 0)
    throw Error(ErrorCode::DimensionMismatch, path + ": non-positive frame dimensions");
  frame.intrinsics.fx = scanner.next_double("fx");
  frame.intrinsics.fy = scanner.next_double("fy");
  frame.intrinsics.cx = scanner.next_double("cx");
  frame.intrinsics.cy = scanner.next_double("cy");

  const size_t pixels = size_t(frame.width) * size_t(frame.height);
  const size_t body_size = pixels * 3 + pixels * sizeof(float);
  if (content.size() - body_start != body_size)
    throw Error(ErrorCode::ParseError,
                path + ": body holds " + std::to_string(content.size() - body_start) +
                    " bytes, expected " + std::to_string(body_size));

  frame.rgb.resize(pixels);
  frame.depth.resize(pixels);
  size_t at = body_start;
  for (size_t i = 0; i < pixels; ++i)
    for (int ch = 0; ch < 3; ++ch)
      frame.rgb[i](ch) = double(static_cast<unsigned char>(content[at++])) / 255.0;
  for (size_t i = 0; i < pixels; ++i) {
    float depth = 0.0f;
    std::memcpy(&depth, content.data() + at, sizeof(float));
    at += sizeof(float);
    frame.depth[i] = double(depth);
  }
  frame.validate();
  return frame;
}

// --- Primitives ------------------------------------------------------------

inline void save_primitives(const std::string& path, const std::vector<Primitive>& primitives) {
  std::ostringstream out;
  out << "ECVP 1\n" << primitives.size() << "\n";
  for (const Primitive& p : primitives) {
    out << (p.kind == PrimitiveKind::Segment ? "S" : "T");
    for (int k = 0; k < 3; ++k) out << " " << detail::format_double(p.position(k));
    for (int k = 0; k < 3; ++k) out << " " << detail::format_double(p.orientation(k));
    for (int k = 0; k < 3; ++k) out << " " << detail::format_double(p.color(k));
    out << " " << p.pixel.x() << " " << p.pixel.y() << "\n";
  }
  detail::write_file(path, out.str(), /*binary=*/false);
}

inline std::vector<Primitive> load_primitives(const std::string& path) {
  detail::TextScanner scanner(detail::read_file(path, false), path);
  detail::check_magic(scanner, "ECVP");
  const long long count = scanner.next_int("primitive count");
  if (count < 0) scanner.fail("negative primitive count");
  std::vector<Primitive> out;
  out.reserve(size_t(count));
  for (long long i = 0; i < count; ++i) {
    Primitive p;
    const std::string kind = scanner.next_token("primitive kind");
    if (kind == "S")
      p.kind = PrimitiveKind::Segment;
    else if (kind == "T")
      p.kind = PrimitiveKind::Texlet;
    else
      scanner.fail("record " + std::to_string(i) + ": unknown primitive kind '" + kind + "'");
    for (int k = 0; k < 3; ++k) p.position(k) = scanner.next_double("position");
    for (int k = 0; k < 3; ++k) p.orientation(k) = scanner.next_double("orientation");
    for (int k = 0; k < 3; ++k) p.color(k) = scanner.next_double("color");
    p.pixel.x() = int(scanner.next_int("pixel u"));
    p.pixel.y() = int(scanner.next_int("pixel v"));
    out.push_back(p);
  }
  if (!scanner.at_end()) scanner.fail("trailing content after the declared records");
  return out;
}

// --- Descriptors -----------------------------------------------------------

inline void save_descriptors(const std::string& path,
                             const std::vector<ContextDescriptor>& descriptors) {
  std::ostringstream out;
  out << "ECVD 1\n" << descriptors.size() << " " << kDescriptorDim << "\n";
  for (const ContextDescriptor& d : descriptors) {
    out << d.source_index << " " << (d.kind == PrimitiveKind::Segment ? "S" : "T");
    for (int k = 0; k < kDescriptorDim; ++k) out << " " << detail::format_double(d.values(k));
    out << "\n";
  }
  detail::write_file(path, out.str(), /*binary=*/false);
}

inline std::vector<ContextDescriptor> load_descriptors(const std::string& path) {
  detail::TextScanner scanner(detail::read_file(path, false), path);
  detail::check_magic(scanner, "ECVD");
  const long long count = scanner.next_int("descriptor count");
  const long long dim = scanner.next_int("descriptor dimension");
  if (count < 0) scanner.fail("negative descriptor count");
  if (dim != kDescriptorDim)
    throw Error(ErrorCode::DimensionMismatch,
                path + ": descriptor dimension " + std::to_string(dim) + ", expected " +
                    std::to_string(kDescriptorDim));
  std::vector<ContextDescriptor> out;
  out.reserve(size_t(count));
  for (long long i = 0; i < count; ++i) {
    ContextDescriptor d;
    d.source_index = int(scanner.next_int("source index"));
    const int record_line = scanner.line();
    const std::string kind = scanner.next_token("descriptor kind");
    if (kind == "S")
      d.kind = PrimitiveKind::Segment;
    else if (kind == "T")
      d.kind = PrimitiveKind::Texlet;
    else
      scanner.fail("record " + std::to_string(i) + ": unknown descriptor kind '" + kind + "'");
    const std::string value_name = "descriptor value (record " + std::to_string(i) + ")";
    for (int k = 0; k < kDescriptorDim; ++k) {
      d.values(k) = scanner.next_double(value_name.c_str());
      // Records are one line each; a short record runs into the next line.
      if (scanner.line() != record_line)
        scanner.fail("record " + std::to_string(i) + " holds fewer than " +
                     std::to_string(kDescriptorDim) + " values");
    }
    out.push_back(d);
  }
  if (!scanner.at_end()) scanner.fail("trailing content after the declared records");
  return out;
}

// --- Correspondences -------------------------------------------------------

inline void save_correspondences(const std::string& path, const CorrespondenceSet& set) {
  std::ostringstream out;
  out << "ECVC 1\n" << set.entries.size() << "\n";
  for (const Correspondence& c : set.entries)
    out << c.object_index << " " << c.scene_index << " " << detail::format_double(c.distance)
        << "\n";
  detail::write_file(path, out.str(), /*binary=*/false);
}

inline CorrespondenceSet load_correspondences(const std::string& path) {
  detail::TextScanner scanner(detail::read_file(path, false), path);
  detail::check_magic(scanner, "ECVC");
  const long long count = scanner.next_int("correspondence count");
  if (count < 0) scanner.fail("negative correspondence count");
  CorrespondenceSet out;
  out.entries.reserve(size_t(count));
  for (long long i = 0; i < count; ++i) {
    Correspondence c;
    c.object_index = int(scanner.next_int("object index"));
    c.scene_index = int(scanner.next_int("scene index"));
    c.distance = scanner.next_double("distance");
    out.entries.push_back(c);
  }
  if (!scanner.at_end()) scanner.fail("trailing content after the declared records");
  return out;
}

// --- Poses -----------------------------------------------------------------

inline void save_transform(const std::string& path, const RigidTransform& t) {
  std::ostringstream out;
  out << "ECVT 1\n";
  const Eigen::Matrix4d m = t.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << (c ? " " : "") << detail::format_double(m(r, c));
    out << "\n";
  }
  detail::write_file(path, out.str(), /*binary=*/false);
}

inline RigidTransform load_transform(const std::string& path) {
  detail::TextScanner scanner(detail::read_file(path, false), path);
  detail::check_magic(scanner, "ECVT");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = scanner.next_double("matrix entry");
  if (!scanner.at_end()) scanner.fail("trailing content after the matrix");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
    scanner.fail("bottom row is not (0 0 0 1)");
  RigidTransform t;
  t.rotation = m.topLeftCorner<3, 3>();
  t.translation = m.topRightCorner<3, 1>();
  const double ortho =
      (t.rotation * t.rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || t.rotation.determinant() < 0.0)
    scanner.fail("rotation block is not a proper rotation");
  return t;
}

// --- Color calibration -----------------------------------------------------

inline void save_color_calibration(const std::string& path, const ColorCalibration& calib) {
  std::ostringstream out;
  out << "ECVM 1\n" << (calib.has_offset ? "affine" : "linear") << "\n";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << (c ? " " : "") << detail::format_double(calib.matrix(r, c));
    out << "\n";
  }
  if (calib.has_offset) {
    for (int k = 0; k < 3; ++k) out << (k ? " " : "") << detail::format_double(calib.offset(k));
    out << "\n";
  }
  detail::write_file(path, out.str(), /*binary=*/false);
}

inline ColorCalibration load_color_calibration(const std::string& path) {
  detail::TextScanner scanner(detail::read_file(path, false), path);
  detail::check_magic(scanner, "ECVM");
  const std::string mode = scanner.next_token("calibration mode");
  if (mode != "linear" && mode != "affine")
    scanner.fail("unknown calibration mode '" + mode + "'");
  ColorCalibration calib;
  calib.has_offset = mode == "affine";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) calib.matrix(r, c) = scanner.next_double("matrix entry");
  if (calib.has_offset)
    for (int k = 0; k < 3; ++k) calib.offset(k) = scanner.next_double("offset entry");
  if (!scanner.at_end()) scanner.fail("trailing content after the calibration");
  return calib;
}

/// Labeled color pairs, six values per line (source rgb, target rgb).
/// '#' starts a comment.
inline std::vector<ColorPair> load_color_pairs(const std::string& path) {
  std::string content = detail::read_file(path, false);
  for (size_t i = 0; i < content.size(); ++i)
    if (content[i] == '#')
      while (i < content.size() && content[i] != '\n') content[i++] = ' ';
  detail::TextScanner scanner(std::move(content), path);
  std::vector<ColorPair> pairs;
  while (!scanner.at_end()) {
    ColorPair pair;
    for (int k = 0; k < 3; ++k) pair.first(k) = scanner.next_double("source color");
    for (int k = 0; k < 3; ++k) pair.second(k) = scanner.next_double("target color");
    pairs.push_back(pair);
  }
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, path + ": no color pairs");
  return pairs;
}

// --- Structured reports ----------------------------------------------------

/// Pose as a row-major 4x4 array at 12 significant digits (report precision).
inline nlohmann::json pose_to_json(const RigidTransform& t) {
  const Eigen::Matrix4d m = t.matrix();
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) rows.push_back(detail::parse_double_12(m(r, c)));
  return rows;
}

inline nlohmann::json registration_report(const RansacResult& r) {
  return {{"command", "register"},
          {"success", r.success},
          {"pose", pose_to_json(r.pose)},
          {"inlier_count", r.inlier_count},
          {"mean_fit_m", r.mean_fit},
          {"time_s", r.elapsed_s},
          {"iterations", r.iterations_run},
          {"samples_drawn", r.samples_drawn},
          {"rejected_polygon", r.rejected_polygon},
          {"rejected_inliers", r.rejected_inliers},
          {"degenerate_samples", r.degenerate_samples},
          {"estimations", r.estimations},
          {"best_iteration", r.best_iteration}};
}

inline nlohmann::json icp_report(const IcpResult& r, double elapsed_s) {
  return {{"command", "icp"},
          {"pose", pose_to_json(r.pose)},
          {"mean_fit_m", r.mean_fit},
          {"iterations", r.iterations},
          {"pairs_used", r.pairs_used},
          {"fit_history", r.fit_history},
          {"time_s", elapsed_s}};
}

inline nlohmann::json score_report(const CorrespondenceScore& s, double elapsed_s) {
  return {{"command", "eval-corr"},
          {"score", s.score},
          {"c_hyp", s.c_hyp},
          {"c_true", s.c_true},
          {"pose", pose_to_json(s.alignment)},
          {"time_s", elapsed_s}};
}

inline nlohmann::json benchmark_report_json(const BenchmarkReport& report) {
  auto variant = [](const BenchmarkVariant& v) {
    return nlohmann::json{{"time_s", v.mean_time_s},
                          {"mean_fit_m", v.mean_fit_m},
                          {"mean_inlier_count", v.mean_inlier_count},
                          {"rejected_polygon", v.rejected_polygon},
                          {"rejected_inliers", v.rejected_inliers},
                          {"samples_drawn", v.samples_drawn},
                          {"successes", v.successes}};
  };
  return {{"command", "bench"},
          {"repeats", report.repeats},
          {"iterations", report.iterations},
          {"samples_drawn_equal", report.samples_drawn_equal},
          {"standard", variant(report.standard)},
          {"modified", variant(report.modified)}};
}

inline nlohmann::json extract_report(const ExtractDiagnostics& d, size_t primitive_count,
                                     double elapsed_s) {
  return {{"command", "extract"},
          {"primitives", primitive_count},
          {"segments", d.segments},
          {"texlets", d.texlets},
          {"cells_total", d.cells_total},
          {"cells_homogeneous", d.cells_homogeneous},
          {"cells_edge", d.cells_edge},
          {"cells_texture", d.cells_texture},
          {"keypoints", d.keypoints_candidates},
          {"keypoints_homogeneous", d.keypoints_homogeneous},
          {"skipped_invalid_depth", d.skipped_invalid_depth},
          {"skipped_insufficient_support", d.skipped_insufficient_support},
          {"time_s", elapsed_s}};
}

inline void save_report(const std::string& path, const nlohmann::json& report) {
  detail::write_file(path, report.dump(2) + "\n", /*binary=*/false);
}

inline nlohmann::json load_report(const std::string& path) {
  return nlohmann::json::parse(detail::read_file(path, false));
}

}  // namespace ecvpose
