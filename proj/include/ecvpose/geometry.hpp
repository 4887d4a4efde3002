#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ecvpose/error.hpp"

namespace ecvpose {

using Point3 = Eigen::Vector3d;

/// Element of SE(3): q = rotation * p + translation, all units in meters.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                                        const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    RigidTransform out;
    out.rotation = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
    out.translation = t;
    return out;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

inline Point3 apply_transform(const RigidTransform& t, const Point3& p) {
  return t.rotation * p + t.translation;
}

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform inverse(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

/// Rotation angle in radians of an orthonormal matrix, in [0, pi].
inline double rotation_angle(const Eigen::Matrix3d& r) {
  double c = (r.trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Combined pose difference: rotation angle plus translation distance.
inline double pose_delta(const RigidTransform& a, const RigidTransform& b) {
  return rotation_angle(a.rotation.transpose() * b.rotation) +
         (a.translation - b.translation).norm();
}

/// Least-squares rigid alignment of scene_pts[i] ~ T * object_pts[i]
/// (centroid + cross-covariance SVD, reflection corrected to det +1).
/// Throws DegenerateGeometry on short/unequal lists or a collinear object set.
inline RigidTransform estimate_rigid_transform(std::span<const Point3> object_pts,
                                               std::span<const Point3> scene_pts) {
  const size_t n = object_pts.size();
  if (n != scene_pts.size())
    throw Error(ErrorCode::DegenerateGeometry, "correspondence lists differ in length");
  if (n < 3)
    throw Error(ErrorCode::DegenerateGeometry, "need at least 3 correspondences");

  Eigen::Vector3d obj_centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d scn_centroid = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    obj_centroid += object_pts[i];
    scn_centroid += scene_pts[i];
  }
  obj_centroid /= double(n);
  scn_centroid /= double(n);

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d obj_scatter = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    Eigen::Vector3d po = object_pts[i] - obj_centroid;
    Eigen::Vector3d ps = scene_pts[i] - scn_centroid;
    cross += ps * po.transpose();
    obj_scatter += po * po.transpose();
  }

  // Collinear (or coincident) object points leave the rotation underdetermined.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> scatter_eig(obj_scatter);
  const double lam_max = scatter_eig.eigenvalues()(2);
  const double lam_mid = scatter_eig.eigenvalues()(1);
  if (lam_max <= 0.0 || lam_mid <= 1e-12 * lam_max)
    throw Error(ErrorCode::DegenerateGeometry, "object points are collinear");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d r = u * v.transpose();
  if (r.determinant() < 0.0) {
    u.col(2) *= -1.0;
    r = u * v.transpose();
  }

  RigidTransform out;
  out.rotation = r;
  out.translation = scn_centroid - r * obj_centroid;
  return out;
}

inline RigidTransform estimate_rigid_transform(const std::vector<Point3>& object_pts,
                                               const std::vector<Point3>& scene_pts) {
  return estimate_rigid_transform(std::span<const Point3>(object_pts),
                                  std::span<const Point3>(scene_pts));
}

/// Mean Euclidean distance ||T*p - q|| over the correspondence list.
inline double alignment_error(const RigidTransform& t,
                              std::span<const std::pair<Point3, Point3>> correspondences) {
  if (correspondences.empty())
    throw Error(ErrorCode::EmptyInput, "alignment_error on empty correspondence list");
  double sum = 0.0;
  for (const auto& [p, q] : correspondences) sum += (apply_transform(t, p) - q).norm();
  return sum / double(correspondences.size());
}

inline double alignment_error(const RigidTransform& t,
                              const std::vector<std::pair<Point3, Point3>>& correspondences) {
  return alignment_error(t, std::span<const std::pair<Point3, Point3>>(correspondences));
}

}  // namespace ecvpose
