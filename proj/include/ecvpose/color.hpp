#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ecvpose/error.hpp"
#include "ecvpose/extract.hpp"

namespace ecvpose {

using ColorPair = std::pair<Eigen::Vector3d, Eigen::Vector3d>;  // (source, target)

struct ColorCalibration {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();  // zero unless fitted
  bool has_offset = false;
  double residual_rms = 0.0;
  double condition = 1.0;  // singular-value ratio of the matrix
};

/// Least-squares channel mapping source -> target over labeled color pairs:
/// target ~= matrix * source (+ offset when with_offset). The plain linear
/// form is the default; the affine offset is opt-in.
inline ColorCalibration estimate_color_matrix(std::span<const ColorPair> pairs,
                                              bool with_offset = false) {
  const int rows = with_offset ? 4 : 3;
  if (int(pairs.size()) < rows)
    throw Error(ErrorCode::EmptyInput, "color calibration needs at least as many pairs as unknowns");

  Eigen::MatrixXd sources(rows, long(pairs.size()));
  Eigen::MatrixXd targets(3, long(pairs.size()));
  for (size_t i = 0; i < pairs.size(); ++i) {
    sources.block<3, 1>(0, long(i)) = pairs[i].first;
    if (with_offset) sources(3, long(i)) = 1.0;
    targets.col(long(i)) = pairs[i].second;
  }

  // min ||M * sources - targets||_F  <=>  sources^T * M^T ~= targets^T.
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sources.transpose(),
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma(0) < 1e-12 || sigma(rows - 1) < 1e-10 * sigma(0))
    throw Error(ErrorCode::RankDeficient, "source colors do not span the channel space");
  const Eigen::MatrixXd mapping = svd.solve(targets.transpose()).transpose();

  ColorCalibration out;
  out.matrix = mapping.leftCols<3>();
  out.has_offset = with_offset;
  if (with_offset) out.offset = mapping.col(3);

  const Eigen::MatrixXd residual =
      mapping * sources - targets;
  out.residual_rms = std::sqrt(residual.squaredNorm() / double(residual.size()));
  const Eigen::JacobiSVD<Eigen::Matrix3d> msvd(out.matrix);
  const double smin = msvd.singularValues()(2);
  out.condition = smin > 0.0 ? msvd.singularValues()(0) / smin
                             : std::numeric_limits<double>::infinity();
  return out;
}

inline ColorCalibration estimate_color_matrix(const std::vector<ColorPair>& pairs,
                                              bool with_offset = false) {
  return estimate_color_matrix(std::span<const ColorPair>(pairs), with_offset);
}

inline Eigen::Vector3d apply_color(const ColorCalibration& calib, const Eigen::Vector3d& c) {
  const Eigen::Vector3d mapped = calib.matrix * c + calib.offset;
  return mapped.cwiseMax(0.0).cwiseMin(1.0);
}

/// Remap every primitive color through the calibration, clamped to [0,1].
inline std::vector<Primitive> apply_color_matrix(const ColorCalibration& calib,
                                                 std::span<const Primitive> primitives) {
  std::vector<Primitive> out(primitives.begin(), primitives.end());
  for (Primitive& p : out) p.color = apply_color(calib, p.color);
  return out;
}

inline std::vector<Primitive> apply_color_matrix(const ColorCalibration& calib,
                                                 const std::vector<Primitive>& primitives) {
  return apply_color_matrix(calib, std::span<const Primitive>(primitives));
}

}  // namespace ecvpose
