#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/frame.hpp"
#include "ecvpose/monogenic.hpp"

namespace ecvpose {

enum class CellClass { Homogeneous, Edge, Texture };
enum class PrimitiveKind { Segment, Texlet };

/// Classified 3-D keypoint. Orientation is the edge direction for segments and
/// the surface normal (flipped toward the camera) for texlets.
struct Primitive {
  Point3 position = Point3::Zero();
  Eigen::Vector3d orientation = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  PrimitiveKind kind = PrimitiveKind::Texlet;
  Eigen::Vector2i pixel = Eigen::Vector2i::Zero();
};

struct PixelCoord {
  int x = 0, y = 0;
};

/// Hexagonal tiling of the pixel grid (pointy-top cells, offset rows).
/// Cells are stored in row-major (r, q) axial order; every pixel belongs to
/// exactly one cell.
struct HexGrid {
  struct Cell {
    int q = 0, r = 0;
    std::vector<PixelCoord> pixels;
  };
  int width = 0, height = 0;
  double cell_size = 0;  // circumradius, pixels
  std::vector<Cell> cells;
  std::vector<int> cell_of_pixel;  // row-major pixel index -> cell index
};

inline HexGrid build_hex_grid(int width, int height, double cell_diameter) {
  if (cell_diameter < 3.0)
    throw Error(ErrorCode::InvalidParameter, "hex cell diameter must be at least 3 px");
  HexGrid grid;
  grid.width = width;
  grid.height = height;
  grid.cell_size = cell_diameter / 2.0;
  grid.cell_of_pixel.assign(size_t(width) * size_t(height), -1);

  const double s = grid.cell_size;
  const double inv_s = 1.0 / s;
  const double sqrt3 = std::sqrt(3.0);

  std::unordered_map<int64_t, int> cell_lookup;
  std::vector<HexGrid::Cell> cells;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double qf = (sqrt3 / 3.0 * x - y / 3.0) * inv_s;
      const double rf = (2.0 / 3.0 * y) * inv_s;
      // cube rounding of fractional axial coordinates
      double xc = qf, zc = rf, yc = -qf - rf;
      double rx = std::round(xc), ry = std::round(yc), rz = std::round(zc);
      const double dx = std::abs(rx - xc), dy = std::abs(ry - yc), dz = std::abs(rz - zc);
      if (dx > dy && dx > dz)
        rx = -ry - rz;
      else if (dy > dz)
        ry = -rx - rz;
      else
        rz = -rx - ry;
      const int q = int(rx), r = int(rz);
      const int64_t key = (int64_t(r) << 32) ^ int64_t(uint32_t(q));
      auto [it, inserted] = cell_lookup.try_emplace(key, int(cells.size()));
      if (inserted) cells.push_back({q, r, {}});
      cells[size_t(it->second)].pixels.push_back({x, y});
    }
  }

  std::vector<int> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = cells[size_t(a)];
    const auto& cb = cells[size_t(b)];
    return ca.r != cb.r ? ca.r < cb.r : ca.q < cb.q;
  });
  grid.cells.reserve(cells.size());
  for (int idx : order) grid.cells.push_back(std::move(cells[size_t(idx)]));
  for (size_t c = 0; c < grid.cells.size(); ++c)
    for (const PixelCoord& p : grid.cells[c].pixels)
      grid.cell_of_pixel[size_t(p.y) * size_t(width) + size_t(p.x)] = int(c);
  return grid;
}

struct Keypoint {
  PixelCoord pixel;
  int cell = -1;
};

inline double max_magnitude(const MopImage& mop) {
  double m = 0.0;
  for (double v : mop.magnitude.data) m = std::max(m, v);
  return m;
}

/// One candidate per cell: the argmax-magnitude pixel, kept only if its
/// magnitude exceeds magnitude_threshold * global max.
inline std::vector<Keypoint> extract_keypoints(const MopImage& mop, const HexGrid& grid,
                                               double magnitude_threshold) {
  const double cutoff = magnitude_threshold * max_magnitude(mop);
  std::vector<Keypoint> keypoints;
  for (size_t c = 0; c < grid.cells.size(); ++c) {
    const auto& cell = grid.cells[c];
    double best = -1.0;
    PixelCoord best_px{};
    for (const PixelCoord& p : cell.pixels) {
      double m = mop.magnitude.at(p.x, p.y);
      if (m > best) {
        best = m;
        best_px = p;
      }
    }
    if (best > cutoff) keypoints.push_back({best_px, int(c)});
  }
  return keypoints;
}

inline std::vector<Keypoint> extract_keypoints(const MopImage& mop, double cell_diameter,
                                               double magnitude_threshold) {
  return extract_keypoints(mop, build_hex_grid(mop.width, mop.height, cell_diameter),
                           magnitude_threshold);
}

struct ClassifyParams {
  double tau_m = 0.1;  // homogeneity cutoff, fraction of global max magnitude
  double tau_o = 0.3;  // edge cutoff on circular variance of doubled orientation
};

/// Intrinsic-dimensionality classification of one cell. Orientation is doubled
/// before the circular statistics because it is a mod-pi quantity; the variance
/// is magnitude-weighted.
inline CellClass classify_cell(const MopImage& mop, std::span<const PixelCoord> cell_pixels,
                               const ClassifyParams& params, double global_max_magnitude) {
  if (cell_pixels.empty()) throw Error(ErrorCode::EmptyInput, "classify_cell on empty cell");
  double mag_sum = 0.0;
  double cx = 0.0, sx = 0.0;
  for (const PixelCoord& p : cell_pixels) {
    const double m = mop.magnitude.at(p.x, p.y);
    const double two_theta = 2.0 * mop.orientation.at(p.x, p.y);
    mag_sum += m;
    cx += m * std::cos(two_theta);
    sx += m * std::sin(two_theta);
  }
  const double mean_mag = mag_sum / double(cell_pixels.size());
  if (global_max_magnitude < 1e-12 || mean_mag < params.tau_m * global_max_magnitude)
    return CellClass::Homogeneous;
  const double circular_variance = 1.0 - std::hypot(cx, sx) / mag_sum;
  return circular_variance < params.tau_o ? CellClass::Edge : CellClass::Texture;
}

inline CellClass classify_cell(const MopImage& mop, std::span<const PixelCoord> cell_pixels,
                               const ClassifyParams& params = {}) {
  return classify_cell(mop, cell_pixels, params, max_magnitude(mop));
}

inline std::vector<CellClass> classify_cells(const MopImage& mop, const HexGrid& grid,
                                             const ClassifyParams& params) {
  const double global_max = max_magnitude(mop);
  std::vector<CellClass> classes(grid.cells.size());
  for (size_t c = 0; c < grid.cells.size(); ++c)
    classes[c] = classify_cell(mop, grid.cells[c].pixels, params, global_max);
  return classes;
}

struct ExtractDiagnostics {
  int cells_total = 0;
  int cells_homogeneous = 0;
  int cells_edge = 0;
  int cells_texture = 0;
  int keypoints_candidates = 0;
  int keypoints_homogeneous = 0;
  int skipped_invalid_depth = 0;
  int skipped_insufficient_support = 0;
  int segments = 0;
  int texlets = 0;
};

/// 3-D reconstruction of retained keypoints. Texlet normals come from a plane
/// fit over back-projected pixels in a normal_radius ball; segment directions
/// from the magnitude-weighted principal direction of edge-cell pixels in the
/// same ball. Keypoints in homogeneous cells are discarded.
inline std::vector<Primitive> reconstruct_primitives(
    const RgbdFrame& frame, const MopImage& mop, const HexGrid& grid,
    std::span<const CellClass> classes, std::span<const Keypoint> keypoints,
    double normal_radius, ExtractDiagnostics* diag = nullptr) {
  if (normal_radius <= 0.0)
    throw Error(ErrorCode::InvalidParameter, "normal_radius must be positive");
  ExtractDiagnostics local;
  ExtractDiagnostics& d = diag ? *diag : local;
  d.keypoints_candidates += int(keypoints.size());

  std::vector<Primitive> primitives;
  for (const Keypoint& kp : keypoints) {
    const CellClass cls = classes[size_t(kp.cell)];
    if (cls == CellClass::Homogeneous) {
      ++d.keypoints_homogeneous;
      continue;
    }
    if (!frame.depth_valid(kp.pixel.x, kp.pixel.y)) {
      ++d.skipped_invalid_depth;
      continue;
    }
    const Point3 pos = frame.backproject(kp.pixel.x, kp.pixel.y);
    const double z = pos.z();
    const int pr =
        int(std::ceil(normal_radius * std::max(frame.intrinsics.fx, frame.intrinsics.fy) / z)) + 1;
    const int x0 = std::max(0, kp.pixel.x - pr), x1 = std::min(frame.width - 1, kp.pixel.x + pr);
    const int y0 = std::max(0, kp.pixel.y - pr), y1 = std::min(frame.height - 1, kp.pixel.y + pr);
    const double r_sq = normal_radius * normal_radius;
    const bool segment = cls == CellClass::Edge;

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    double weight_sum = 0.0;
    std::vector<std::pair<Point3, double>> support;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!frame.depth_valid(x, y)) continue;
        if (segment) {
          const int cell = grid.cell_of_pixel[frame.index(x, y)];
          if (classes[size_t(cell)] != CellClass::Edge) continue;
        }
        const Point3 p = frame.backproject(x, y);
        if ((p - pos).squaredNorm() > r_sq) continue;
        const double w = segment ? mop.magnitude.at(x, y) : 1.0;
        if (w <= 0.0) continue;
        support.emplace_back(p, w);
        mean += w * p;
        weight_sum += w;
      }
    }
    if (support.size() < 3 || weight_sum <= 0.0) {
      ++d.skipped_insufficient_support;
      continue;
    }
    mean /= weight_sum;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& [p, w] : support) {
      Eigen::Vector3d v = p - mean;
      cov += w * v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);

    Primitive prim;
    prim.position = pos;
    prim.color = frame.color(kp.pixel.x, kp.pixel.y);
    prim.pixel = {kp.pixel.x, kp.pixel.y};
    if (segment) {
      Eigen::Vector3d dir = eig.eigenvectors().col(2).normalized();
      int max_comp = 0;
      dir.cwiseAbs().maxCoeff(&max_comp);
      if (dir(max_comp) < 0.0) dir = -dir;  // deterministic sign for a mod-pi direction
      prim.orientation = dir;
      prim.kind = PrimitiveKind::Segment;
      ++d.segments;
    } else {
      Eigen::Vector3d normal = eig.eigenvectors().col(0).normalized();
      if (normal.dot(pos) > 0.0) normal = -normal;  // face the camera
      prim.orientation = normal;
      prim.kind = PrimitiveKind::Texlet;
      ++d.texlets;
    }
    primitives.push_back(prim);
  }
  return primitives;
}

struct ExtractParams {
  MonogenicParams monogenic;
  double hex_diameter = 7.0;
  double magnitude_threshold = 0.1;
  ClassifyParams classify;
  double normal_radius = 0.02;
};

struct ExtractResult {
  std::vector<Primitive> primitives;
  ExtractDiagnostics diagnostics;
};

/// Full extraction pipeline: monogenic filtering, hexagonal-grid keypoints,
/// cell classification, 3-D reconstruction.
inline ExtractResult extract_primitives(const RgbdFrame& frame, const ExtractParams& params) {
  frame.validate();
  const MopImage mop = monogenic_filter(frame, params.monogenic);
  const HexGrid grid = build_hex_grid(frame.width, frame.height, params.hex_diameter);
  const std::vector<CellClass> classes = classify_cells(mop, grid, params.classify);
  const std::vector<Keypoint> keypoints =
      extract_keypoints(mop, grid, params.magnitude_threshold);

  ExtractResult result;
  result.diagnostics.cells_total = int(grid.cells.size());
  for (CellClass c : classes) {
    if (c == CellClass::Homogeneous)
      ++result.diagnostics.cells_homogeneous;
    else if (c == CellClass::Edge)
      ++result.diagnostics.cells_edge;
    else
      ++result.diagnostics.cells_texture;
  }
  result.primitives = reconstruct_primitives(frame, mop, grid, classes, keypoints,
                                             params.normal_radius, &result.diagnostics);
  return result;
}

}  // namespace ecvpose
