#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/geometry.hpp"

namespace ecvpose {

/// Row-major scalar image.
template <typename T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * size_t(h), fill) {}

  T& at(int x, int y) { return data[size_t(y) * size_t(width) + size_t(x)]; }
  const T& at(int x, int y) const { return data[size_t(y) * size_t(width) + size_t(x)]; }
  size_t size() const { return data.size(); }
};

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

/// RGB-D input frame. Colors are normalized to [0,1]; depth is in meters with
/// 0 or NaN marking invalid pixels.
struct RgbdFrame {
  int width = 0, height = 0;
  Intrinsics intrinsics;
  std::vector<Eigen::Vector3d> rgb;  // row-major, [0,1] per channel
  std::vector<double> depth;         // row-major, meters

  RgbdFrame() = default;
  RgbdFrame(int w, int h, const Intrinsics& intr)
      : width(w),
        height(h),
        intrinsics(intr),
        rgb(size_t(w) * size_t(h), Eigen::Vector3d::Zero()),
        depth(size_t(w) * size_t(h), 0.0) {}

  size_t index(int x, int y) const { return size_t(y) * size_t(width) + size_t(x); }

  const Eigen::Vector3d& color(int x, int y) const { return rgb[index(x, y)]; }
  Eigen::Vector3d& color(int x, int y) { return rgb[index(x, y)]; }
  double depth_at(int x, int y) const { return depth[index(x, y)]; }
  double& depth_at(int x, int y) { return depth[index(x, y)]; }

  bool depth_valid(int x, int y) const {
    double z = depth_at(x, y);
    return std::isfinite(z) && z > 0.0;
  }

  /// Pinhole back-projection of pixel (x, y) at its stored depth.
  Point3 backproject(int x, int y) const {
    double z = depth_at(x, y);
    return {(double(x) - intrinsics.cx) * z / intrinsics.fx,
            (double(y) - intrinsics.cy) * z / intrinsics.fy, z};
  }

  void validate() const {
    if (width <= 0 || height <= 0)
      throw Error(ErrorCode::InvalidSpec, "frame has empty pixel grid");
    if (intrinsics.fx <= 0 || intrinsics.fy <= 0)
      throw Error(ErrorCode::InvalidSpec, "focal lengths must be positive");
    if (rgb.size() != size_t(width) * size_t(height) || depth.size() != rgb.size())
      throw Error(ErrorCode::DimensionMismatch, "frame buffers do not match width*height");
  }
};

/// Rec. 601 luminance, the fixed grayscale used ahead of filtering.
inline Image<double> luminance(const RgbdFrame& frame) {
  Image<double> gray(frame.width, frame.height);
  for (size_t i = 0; i < frame.rgb.size(); ++i) {
    const Eigen::Vector3d& c = frame.rgb[i];
    gray.data[i] = 0.299 * c(0) + 0.587 * c(1) + 0.114 * c(2);
  }
  return gray;
}

}  // namespace ecvpose
