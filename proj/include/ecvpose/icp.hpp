#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/geometry.hpp"
#include "ecvpose/kdtree.hpp"

namespace ecvpose {

struct IcpConfig {
  int max_iterations = 50;
  double reject_dist = 0.05;        // meters; pairs beyond this are dropped
  double convergence_delta = 1e-6;  // rotation angle (rad) + translation (m)

  void validate() const {
    if (max_iterations < 1)
      throw Error(ErrorCode::InvalidParameter, "max_iterations must be >= 1");
    if (!(reject_dist > 0.0))
      throw Error(ErrorCode::InvalidParameter, "reject_dist must be positive");
    if (convergence_delta < 0.0)
      throw Error(ErrorCode::InvalidParameter, "convergence_delta must be non-negative");
  }
};

struct IcpResult {
  RigidTransform pose;
  double mean_fit = 0.0;  // meters, mean surviving-pair distance at exit
  int iterations = 0;
  std::int64_t pairs_used = 0;          // surviving pairs at exit
  std::vector<double> fit_history;      // mean pair distance before each re-estimation
};

/// Point-to-point iterative closest point. Each round pairs every transformed
/// source point with its nearest target point, drops pairs beyond
/// reject_dist, and re-estimates the pose on the survivors; stops when the
/// pose change falls below convergence_delta. Fully deterministic.
inline IcpResult icp_align(std::span<const Point3> source, std::span<const Point3> target,
                           const RigidTransform& init, const IcpConfig& cfg = {}) {
  cfg.validate();
  if (source.size() < 3 || target.size() < 3)
    throw Error(ErrorCode::EmptyInput, "icp_align needs at least 3 points per cloud");

  const KdTree3 target_tree(std::vector<Point3>(target.begin(), target.end()));
  const double reject_sq = cfg.reject_dist * cfg.reject_dist;

  IcpResult result;
  result.pose = init;
  std::vector<Point3> paired_src, paired_tgt;
  paired_src.reserve(source.size());
  paired_tgt.reserve(source.size());

  // Pair under the current pose; returns mean pair distance.
  auto make_pairs = [&](const RigidTransform& pose) {
    paired_src.clear();
    paired_tgt.clear();
    double sum = 0.0;
    for (const Point3& s : source) {
      const Point3 moved = apply_transform(pose, s);
      const KdTree3::Hit hit = target_tree.nearest(moved);
      if (hit.dist_sq <= reject_sq) {
        paired_src.push_back(s);
        paired_tgt.push_back(target[size_t(hit.index)]);
        sum += std::sqrt(hit.dist_sq);
      }
    }
    if (paired_src.size() < 3)
      throw Error(ErrorCode::NoOverlap, "fewer than 3 point pairs survive rejection");
    return sum / double(paired_src.size());
  };

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    result.fit_history.push_back(make_pairs(result.pose));
    const RigidTransform next = estimate_rigid_transform(paired_src, paired_tgt);
    const double delta = pose_delta(result.pose, next);
    result.pose = next;
    result.iterations = iter;
    if (delta < cfg.convergence_delta) break;
  }

  result.mean_fit = make_pairs(result.pose);
  result.pairs_used = std::int64_t(paired_src.size());
  return result;
}

inline IcpResult icp_align(const std::vector<Point3>& source, const std::vector<Point3>& target,
                           const RigidTransform& init, const IcpConfig& cfg = {}) {
  return icp_align(std::span<const Point3>(source), std::span<const Point3>(target), init, cfg);
}

}  // namespace ecvpose
