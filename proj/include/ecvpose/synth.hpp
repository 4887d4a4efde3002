#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/frame.hpp"
#include "ecvpose/geometry.hpp"
#include "ecvpose/util.hpp"

namespace ecvpose {

/// Parametric scene element. Local frames: plane = rectangle in z=0 with half
/// extents (size.x, size.y); box = half extents size; cylinder = axis along
/// z, radius size.x, half length size.z, with end caps.
struct Shape {
  enum class Kind { Plane, Box, Cylinder };
  Kind kind = Kind::Plane;
  RigidTransform pose;  // shape-local -> scene
  Eigen::Vector3d size = Eigen::Vector3d(0.1, 0.1, 0.1);
  Eigen::Vector3d base_color = Eigen::Vector3d(0.5, 0.5, 0.5);
  double texture_scale = 0.02;     // meters, coarsest texture feature size
  double texture_contrast = 0.35;  // peak additive excursion per channel
};

struct SceneSpec {
  int width = 0;
  int height = 0;
  Intrinsics intrinsics;
  std::vector<Shape> shapes;
  double noise_sigma = 0.0;        // meters, along-ray depth noise (clamped at 3 sigma)
  double occlusion_fraction = 0.0; // fraction of pixels erased to invalid depth
  std::uint64_t texture_seed = 1;
  std::uint64_t noise_seed = 2;

  void validate() const {
    if (width <= 0 || height <= 0)
      throw Error(ErrorCode::InvalidSpec, "scene dimensions must be positive");
    if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0))
      throw Error(ErrorCode::InvalidSpec, "focal lengths must be positive");
    if (shapes.empty()) throw Error(ErrorCode::InvalidSpec, "scene needs at least one shape");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise sigma must be >= 0");
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0))
      throw Error(ErrorCode::InvalidSpec, "occlusion fraction must lie in [0,1]");
    for (const Shape& s : shapes) {
      const bool ok = s.kind == Shape::Kind::Plane
                          ? s.size.x() > 0.0 && s.size.y() > 0.0
                          : s.size.x() > 0.0 && s.size.y() > 0.0 && s.size.z() > 0.0;
      if (!ok) throw Error(ErrorCode::InvalidSpec, "shape sizes must be positive");
      if (!(s.texture_scale > 0.0))
        throw Error(ErrorCode::InvalidSpec, "texture scale must be positive");
      for (int k = 0; k < 3; ++k)
        if (!(s.base_color(k) >= 0.0 && s.base_color(k) <= 1.0))
          throw Error(ErrorCode::InvalidSpec, "base colors must lie in [0,1]");
    }
  }
};

struct SyntheticScene {
  RgbdFrame frame;
  RigidTransform ground_truth_pose;  // scene pose the shapes were rendered under
  SceneSpec spec;
};

namespace detail {

/// Ray/shape intersection in the shape-local frame. The ray is o + t*d with d
/// unnormalized (d.z = 1 in camera scale), so t equals camera-frame depth.
struct SurfaceHit {
  double t = std::numeric_limits<double>::infinity();
  int face = 0;                 // texture chart id within the shape
  Eigen::Vector2d surf{0, 0};   // shape-local chart coordinates (meters)
};

inline std::optional<SurfaceHit> intersect_plane(const Shape& s, const Point3& o,
                                                 const Eigen::Vector3d& d) {
  if (std::abs(d.z()) < 1e-14) return std::nullopt;
  const double t = -o.z() / d.z();
  if (t < 1e-6) return std::nullopt;
  const Point3 p = o + t * d;
  if (std::abs(p.x()) > s.size.x() || std::abs(p.y()) > s.size.y()) return std::nullopt;
  return SurfaceHit{t, 0, {p.x(), p.y()}};
}

inline std::optional<SurfaceHit> intersect_box(const Shape& s, const Point3& o,
                                               const Eigen::Vector3d& d) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = 0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-14) {
      if (std::abs(o(a)) > s.size(a)) return std::nullopt;
      continue;
    }
    double lo = (-s.size(a) - o(a)) / d(a);
    double hi = (s.size(a) - o(a)) / d(a);
    if (lo > hi) std::swap(lo, hi);
    if (lo > t_enter) {
      t_enter = lo;
      enter_axis = a;
    }
    t_exit = std::min(t_exit, hi);
  }
  if (t_enter > t_exit) return std::nullopt;
  const double t = t_enter > 1e-6 ? t_enter : t_exit;
  if (t < 1e-6 || t == std::numeric_limits<double>::infinity()) return std::nullopt;
  const Point3 p = o + t * d;
  const int side = p(enter_axis) >= 0.0 ? 1 : 0;
  const int u_axis = (enter_axis + 1) % 3;
  const int v_axis = (enter_axis + 2) % 3;
  return SurfaceHit{t, enter_axis * 2 + side, {p(u_axis), p(v_axis)}};
}

inline std::optional<SurfaceHit> intersect_cylinder(const Shape& s, const Point3& o,
                                                    const Eigen::Vector3d& d) {
  const double r = s.size.x(), hl = s.size.z();
  SurfaceHit best;
  bool found = false;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-16) {
    const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t < 1e-6 || t >= best.t) continue;
        const Point3 p = o + t * d;
        if (std::abs(p.z()) <= hl) {
          best = SurfaceHit{t, 0, {std::atan2(p.y(), p.x()) * r, p.z()}};
          found = true;
        }
      }
    }
  }
  if (std::abs(d.z()) > 1e-14) {
    for (const int side : {0, 1}) {
      const double zc = side == 1 ? hl : -hl;
      const double t = (zc - o.z()) / d.z();
      if (t < 1e-6 || t >= best.t) continue;
      const Point3 p = o + t * d;
      if (p.x() * p.x() + p.y() * p.y() <= r * r) {
        best = SurfaceHit{t, 1 + side, {p.x(), p.y()}};
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

inline std::optional<SurfaceHit> intersect_shape(const Shape& s, const Point3& o,
                                                 const Eigen::Vector3d& d) {
  switch (s.kind) {
    case Shape::Kind::Plane: return intersect_plane(s, o, d);
    case Shape::Kind::Box: return intersect_box(s, o, d);
    case Shape::Kind::Cylinder: return intersect_cylinder(s, o, d);
  }
  return std::nullopt;
}

/// Smooth value noise on a surface chart, deterministic in (seed, lattice).
inline double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = std::int64_t(fx), iy = std::int64_t(fy);
  auto corner = [&](std::int64_t dx, std::int64_t dy) {
    const std::uint64_t hx = std::uint64_t(ix + dx) * 0x9e3779b97f4a7c15ULL;
    const std::uint64_t hy = std::uint64_t(iy + dy) * 0xbf58476d1ce4e5b9ULL;
    return hash_unit(seed ^ hx ^ hy);
  };
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  const double top = corner(0, 0) + tx * (corner(1, 0) - corner(0, 0));
  const double bot = corner(0, 1) + tx * (corner(1, 1) - corner(0, 1));
  return top + ty * (bot - top);
}

inline Eigen::Vector3d texture_color(const Shape& s, std::uint64_t scene_seed, int shape_index,
                                     const SurfaceHit& hit) {
  Eigen::Vector3d c = s.base_color;
  const std::uint64_t key =
      splitmix64(scene_seed + 0x51ed2701u * std::uint64_t(shape_index + 1) +
                 std::uint64_t(hit.face) * 0xc2b2ae3d27d4eb4fULL);
  for (int ch = 0; ch < 3; ++ch) {
    double v = 0.0, weight = 0.55, scale = s.texture_scale;
    for (int octave = 0; octave < 3; ++octave) {
      const std::uint64_t sub = splitmix64(key + std::uint64_t(ch * 3 + octave));
      v += weight * (2.0 * value_noise(sub, hit.surf.x() / scale, hit.surf.y() / scale) - 1.0);
      weight *= 0.55;
      scale *= 0.5;
    }
    c(ch) = std::clamp(c(ch) + s.texture_contrast * v, 0.0, 1.0);
  }
  return c;
}

/// Standard normal deviate from a counter-based generator (Box-Muller), so
/// output is identical across platforms and thread counts.
inline double gaussian_noise(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t h1 = splitmix64(seed ^ splitmix64(counter * 2 + 1));
  const std::uint64_t h2 = splitmix64(seed ^ splitmix64(counter * 2 + 2));
  const double u1 = (double(h1 >> 11) + 1.0) * 0x1p-53;  // (0, 1]
  const double u2 = double(h2 >> 11) * 0x1p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace detail

/// Render the composition of shapes (rigidly moved by `pose`) into an RGB-D
/// frame: per-pixel ray casting, procedural surface texture keyed to
/// shape-local coordinates (view-consistent), truncated Gaussian depth noise,
/// and random pixel erasure. Colors are quantized to 8 bits and depths to
/// 32-bit floats so a file round trip reproduces the frame exactly.
inline SyntheticScene generate_scene(const SceneSpec& spec, const RigidTransform& pose,
                                     int threads = 1) {
  spec.validate();

  SyntheticScene scene;
  scene.spec = spec;
  scene.ground_truth_pose = pose;
  RgbdFrame& frame = scene.frame;
  frame.width = spec.width;
  frame.height = spec.height;
  frame.intrinsics = spec.intrinsics;
  frame.rgb.assign(size_t(spec.width) * size_t(spec.height), Eigen::Vector3d::Zero());
  frame.depth.assign(size_t(spec.width) * size_t(spec.height), 0.0);

  struct LocalFrame {
    Eigen::Matrix3d rot_inv;
    Point3 origin;  // camera center in the shape frame
  };
  std::vector<LocalFrame> locals;
  locals.reserve(spec.shapes.size());
  for (const Shape& s : spec.shapes) {
    const RigidTransform world_from_shape = compose(pose, s.pose);
    const Eigen::Matrix3d rot_inv = world_from_shape.rotation.transpose();
    locals.push_back({rot_inv, -(rot_inv * world_from_shape.translation)});
  }

  const std::uint64_t occlusion_seed = splitmix64(spec.noise_seed ^ 0x1234abcd5678ef01ULL);

  parallel_for(frame.depth.size(), threads, [&](size_t begin, size_t end) {
    for (size_t idx = begin; idx < end; ++idx) {
      const int u = int(idx % size_t(spec.width));
      const int v = int(idx / size_t(spec.width));
      const Eigen::Vector3d dir((double(u) - spec.intrinsics.cx) / spec.intrinsics.fx,
                                (double(v) - spec.intrinsics.cy) / spec.intrinsics.fy, 1.0);

      double depth = std::numeric_limits<double>::infinity();
      int hit_shape = -1;
      detail::SurfaceHit hit;
      for (size_t si = 0; si < spec.shapes.size(); ++si) {
        const Eigen::Vector3d local_dir = locals[si].rot_inv * dir;
        const auto candidate =
            detail::intersect_shape(spec.shapes[si], locals[si].origin, local_dir);
        if (candidate && candidate->t < depth) {
          depth = candidate->t;
          hit_shape = int(si);
          hit = *candidate;
        }
      }
      if (hit_shape < 0) continue;

      Eigen::Vector3d color =
          detail::texture_color(spec.shapes[size_t(hit_shape)], spec.texture_seed, hit_shape, hit);
      for (int ch = 0; ch < 3; ++ch)
        color(ch) = std::round(color(ch) * 255.0) / 255.0;
      frame.rgb[idx] = color;

      if (hash_unit(splitmix64(occlusion_seed + idx)) < spec.occlusion_fraction) continue;
      if (spec.noise_sigma > 0.0) {
        const double g = detail::gaussian_noise(spec.noise_seed, std::uint64_t(idx));
        depth += spec.noise_sigma * std::clamp(g, -3.0, 3.0);
      }
      if (depth <= 0.0) continue;
      frame.depth[idx] = double(float(depth));
    }
  });

  return scene;
}

/// Fronto-parallel textured plane filling the view at the given depth.
inline SceneSpec plane_scene_spec(double depth = 1.0, int width = 320, int height = 240) {
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.intrinsics = {280.0, 280.0, (width - 1) / 2.0, (height - 1) / 2.0};
  Shape plane;
  plane.kind = Shape::Kind::Plane;
  plane.pose = RigidTransform{Eigen::Matrix3d::Identity(), {0.0, 0.0, depth}};
  const double margin = 1.3 * depth / 280.0;
  plane.size = {width * margin, height * margin, 0.0};
  plane.base_color = {0.55, 0.5, 0.42};
  plane.texture_scale = 0.035 * depth;
  plane.texture_contrast = 0.4;
  spec.shapes.push_back(plane);
  return spec;
}

/// The standard desk-scale benchmark composition: a tilted table plane, a box
/// and a cylinder, strongly textured, with mild sensor-like depth noise.
inline SceneSpec benchmark_scene_spec() {
  SceneSpec spec;
  spec.width = 320;
  spec.height = 240;
  spec.intrinsics = {280.0, 280.0, 159.5, 119.5};
  spec.noise_sigma = 0.0008;
  spec.occlusion_fraction = 0.02;
  spec.texture_seed = 41;
  spec.noise_seed = 97;

  Shape table;
  table.kind = Shape::Kind::Plane;
  table.pose = RigidTransform::from_axis_angle({1, 0, 0}, -0.45, {0.0, 0.12, 0.85});
  table.size = {0.55, 0.45, 0.0};
  table.base_color = {0.52, 0.44, 0.34};
  table.texture_scale = 0.030;
  table.texture_contrast = 0.38;
  spec.shapes.push_back(table);

  Shape box;
  box.kind = Shape::Kind::Box;
  box.pose = RigidTransform::from_axis_angle(Eigen::Vector3d(0.2, 1.0, 0.25).normalized(), 0.55,
                                             {-0.065, 0.015, 0.64});
  box.size = {0.055, 0.045, 0.05};
  box.base_color = {0.32, 0.48, 0.62};
  box.texture_scale = 0.022;
  box.texture_contrast = 0.4;
  spec.shapes.push_back(box);

  Shape cyl;
  cyl.kind = Shape::Kind::Cylinder;
  cyl.pose = RigidTransform::from_axis_angle(Eigen::Vector3d(1.0, 0.1, 0.1).normalized(), 1.2,
                                             {0.085, 0.0, 0.68});
  cyl.size = {0.035, 0.035, 0.065};
  cyl.base_color = {0.6, 0.34, 0.3};
  cyl.texture_scale = 0.02;
  cyl.texture_contrast = 0.4;
  spec.shapes.push_back(cyl);

  return spec;
}

/// Second-camera pose for the two-view benchmark: ~9 degrees off the first
/// view with a few centimeters of translation.
inline RigidTransform benchmark_view_pose() {
  return RigidTransform::from_axis_angle(Eigen::Vector3d(0.3, 1.0, 0.15).normalized(), 0.16,
                                         {0.025, -0.012, 0.018});
}

}  // namespace ecvpose
