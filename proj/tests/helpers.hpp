#pragma once

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ecvpose/ecvpose_core.hpp"

namespace testutil {

using ecvpose::Point3;
using ecvpose::Primitive;
using ecvpose::PrimitiveKind;
using ecvpose::RigidTransform;

inline Eigen::Vector3d random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = {gauss(rng), gauss(rng), gauss(rng)};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline RigidTransform random_transform(std::mt19937_64& rng, double max_angle = M_PI,
                                       double max_translation = 1.0) {
  std::uniform_real_distribution<double> uang(-max_angle, max_angle);
  std::uniform_real_distribution<double> utr(-max_translation, max_translation);
  return RigidTransform::from_axis_angle(random_unit_vector(rng), uang(rng),
                                         {utr(rng), utr(rng), utr(rng)});
}

inline std::vector<Point3> random_cloud(std::mt19937_64& rng, int count, double extent,
                                        const Point3& center = Point3::Zero()) {
  std::uniform_real_distribution<double> u(-extent / 2.0, extent / 2.0);
  std::vector<Point3> cloud;
  cloud.reserve(size_t(count));
  for (int i = 0; i < count; ++i) cloud.push_back(center + Point3(u(rng), u(rng), u(rng)));
  return cloud;
}

/// Random primitives packed densely enough that descriptor neighborhoods at
/// the default radius (0.025 m) hold plenty of members.
inline std::vector<Primitive> random_primitives(std::mt19937_64& rng, int count,
                                                double extent = 0.1,
                                                const Point3& center = Point3::Zero()) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Primitive> out;
  out.reserve(size_t(count));
  for (const Point3& p : random_cloud(rng, count, extent, center)) {
    Primitive prim;
    prim.position = p;
    prim.orientation = random_unit_vector(rng);
    prim.color = {u01(rng), u01(rng), u01(rng)};
    prim.kind = u01(rng) < 0.5 ? PrimitiveKind::Segment : PrimitiveKind::Texlet;
    out.push_back(prim);
  }
  return out;
}

inline std::vector<Primitive> transform_primitives(const RigidTransform& t,
                                                   const std::vector<Primitive>& primitives) {
  std::vector<Primitive> out = primitives;
  for (Primitive& p : out) {
    p.position = ecvpose::apply_transform(t, p.position);
    p.orientation = t.rotation * p.orientation;
  }
  return out;
}

/// Smallest angular separation of two line orientations (mod pi quantities).
inline double mod_pi_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), M_PI);
  return std::min(d, M_PI - d);
}

inline double unit_double(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Runs fn, expecting it to throw an ecvpose::Error with the given code.
template <typename Fn>
void expect_error(ecvpose::ErrorCode code, Fn&& fn) {
  try {
    fn();
  } catch (const ecvpose::Error& e) {
    EXPECT_EQ(e.code(), code) << "unexpected error: " << e.what();
    return;
  } catch (const std::exception& e) {
    ADD_FAILURE() << "wrong exception type: " << e.what();
    return;
  }
  ADD_FAILURE() << "expected an error with code " << int(code) << ", nothing was thrown";
}

class TempDir {
 public:
  TempDir() {
    char templ[] = "/tmp/ecvpose_test_XXXXXX";
    const char* dir = mkdtemp(templ);
    if (!dir) throw std::runtime_error("mkdtemp failed");
    path_ = dir;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return path_ + "/" + name; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace testutil
