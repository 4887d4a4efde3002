#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/extract.hpp"
#include "ecvpose/geometry.hpp"
#include "ecvpose/kdtree.hpp"
#include "ecvpose/matching.hpp"

namespace ecvpose {

/// Number of sampling rounds needed to draw at least one all-inlier sample of
/// size n with probability p, when each correspondence is an inlier with
/// probability w. Rounded to the nearest integer, never below 1.
inline std::int64_t required_iterations(double p, double w, int n) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorCode::InvalidParameter, "success probability must lie in (0,1)");
  if (!(w > 0.0 && w <= 1.0))
    throw Error(ErrorCode::InvalidParameter, "inlier fraction must lie in (0,1]");
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "sample size must be >= 1");
  if (w == 1.0) return 1;
  const double wn = std::pow(w, n);
  const double k = std::log1p(-p) / std::log1p(-wn);
  if (!(k < 9.0e18)) return std::int64_t(9000000000000000000LL);
  return std::max<std::int64_t>(1, std::llround(k));
}

/// Relative edge-length dissimilarity between the closed polygons spanned by
/// two equally sized point tuples (edge i connects point i to point i+1,
/// wrapping around). Component i is |d_p,i - d_q,i| / max(d_p,i, d_q,i).
inline Eigen::VectorXd polygon_dissimilarity(std::span<const Point3> object_pts,
                                             std::span<const Point3> scene_pts) {
  const size_t n = object_pts.size();
  if (n != scene_pts.size())
    throw Error(ErrorCode::InvalidParameter, "polygon point tuples differ in size");
  if (n < 3) throw Error(ErrorCode::InvalidParameter, "polygon needs at least 3 points");
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(long(n));
  for (size_t i = 0; i < n; ++i) {
    const size_t j = (i + 1) % n;
    const double dp = (object_pts[j] - object_pts[i]).norm();
    const double dq = (scene_pts[j] - scene_pts[i]).norm();
    const double longest = std::max(dp, dq);
    if (longest < 1e-9)
      throw Error(ErrorCode::DegenerateSample, "polygon edge collapsed on both sides");
    delta(long(i)) = std::abs(dp - dq) / longest;
  }
  return delta;
}

inline Eigen::VectorXd polygon_dissimilarity(const std::vector<Point3>& object_pts,
                                             const std::vector<Point3>& scene_pts) {
  return polygon_dissimilarity(std::span<const Point3>(object_pts),
                               std::span<const Point3>(scene_pts));
}

struct RansacConfig {
  int sample_size = 3;
  double t_poly = 0.25;
  double inlier_dist = 0.01;          // meters
  double min_inlier_fraction = 0.5;   // of all object points
  std::int64_t iterations = 0;        // 0 = derive from (p, w, sample_size)
  double p = 0.99;
  double w = 0.05;
  double convergence_error = 0.0;     // meters; <= 0 disables early exit
  bool prefilter_enabled = true;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (sample_size < 3)
      throw Error(ErrorCode::InvalidParameter, "sample_size must be >= 3");
    if (!(t_poly > 0.0 && t_poly < 1.0))
      throw Error(ErrorCode::InvalidParameter, "t_poly must lie in (0,1)");
    if (!(inlier_dist > 0.0))
      throw Error(ErrorCode::InvalidParameter, "inlier_dist must be positive");
    if (!(min_inlier_fraction > 0.0 && min_inlier_fraction <= 1.0))
      throw Error(ErrorCode::InvalidParameter, "min_inlier_fraction must lie in (0,1]");
    if (iterations < 0)
      throw Error(ErrorCode::InvalidParameter, "iterations must be non-negative");
    if (!(p > 0.0 && p < 1.0))
      throw Error(ErrorCode::InvalidParameter, "p must lie in (0,1)");
    if (!(w > 0.0 && w <= 1.0))
      throw Error(ErrorCode::InvalidParameter, "w must lie in (0,1]");
  }

  std::int64_t effective_iterations() const {
    return iterations > 0 ? iterations : required_iterations(p, w, sample_size);
  }
};

struct RansacResult {
  bool success = false;
  RigidTransform pose;  // identity unless success
  std::int64_t inlier_count = 0;
  double mean_fit = std::numeric_limits<double>::infinity();  // meters, over inlier pairs
  std::int64_t best_iteration = -1;

  std::int64_t iterations_run = 0;
  std::int64_t samples_drawn = 0;  // includes redraws forced by index collisions
  std::int64_t rejected_polygon = 0;
  std::int64_t rejected_inliers = 0;
  std::int64_t degenerate_samples = 0;  // collapsed polygons / collinear estimations
  std::int64_t estimations = 0;         // calls into transform estimation
  double elapsed_s = 0.0;
};

/// Consensus search for the rigid transform mapping object points into the
/// scene. Candidate poses come from random correspondence triples (optionally
/// screened by the polygon dissimilarity test); support is measured by how
/// many object points land within inlier_dist of some scene point. The
/// returned pose is re-estimated on its inlier pairs and ranked by mean pair
/// distance. Deterministic for a fixed seed; the sample sequence does not
/// depend on prefilter_enabled, so paired on/off runs are comparable.
inline RansacResult ransac_register(std::span<const Point3> object_points,
                                    std::span<const Point3> scene_points,
                                    const CorrespondenceSet& correspondences,
                                    const RansacConfig& cfg) {
  cfg.validate();
  if (object_points.empty() || scene_points.empty())
    throw Error(ErrorCode::EmptyInput, "registration needs non-empty point sets");
  const size_t n = size_t(cfg.sample_size);
  const size_t m = correspondences.entries.size();
  if (m < n)
    throw Error(ErrorCode::NoConsensus, "fewer correspondences than the sample size");
  for (const Correspondence& c : correspondences.entries) {
    if (c.object_index < 0 || size_t(c.object_index) >= object_points.size() ||
        c.scene_index < 0 || size_t(c.scene_index) >= scene_points.size())
      throw Error(ErrorCode::InvalidParameter, "correspondence index out of range");
  }
  {
    std::vector<int> scene_ids;
    scene_ids.reserve(m);
    for (const Correspondence& c : correspondences.entries) scene_ids.push_back(c.scene_index);
    std::sort(scene_ids.begin(), scene_ids.end());
    scene_ids.erase(std::unique(scene_ids.begin(), scene_ids.end()), scene_ids.end());
    if (scene_ids.size() < n)
      throw Error(ErrorCode::NoConsensus,
                  "correspondences reference fewer distinct scene points than the sample size");
  }

  const auto t0 = std::chrono::steady_clock::now();
  RansacResult result;

  const KdTree3 scene_tree(std::vector<Point3>(scene_points.begin(), scene_points.end()));
  const std::int64_t budget = cfg.effective_iterations();
  const auto required_inliers =
      std::int64_t(std::ceil(cfg.min_inlier_fraction * double(object_points.size()) - 1e-12));

  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<size_t> sample(n);
  std::vector<Point3> sample_obj(n), sample_scn(n);
  std::vector<Point3> inlier_obj, inlier_scn;
  std::vector<Point3> transformed(object_points.size());

  for (std::int64_t iter = 0; iter < budget; ++iter) {
    ++result.iterations_run;

    // Draw until the object indices and their matched scene indices are both
    // distinct. The draw sequence depends only on the correspondence set and
    // the seed, never on the prefilter flag.
    bool valid = false;
    for (int attempt = 0; attempt < 10000 && !valid; ++attempt) {
      ++result.samples_drawn;
      for (size_t j = 0; j < n; ++j) sample[j] = size_t(rng() % m);
      valid = true;
      for (size_t a = 0; a < n && valid; ++a)
        for (size_t b = a + 1; b < n && valid; ++b) {
          const Correspondence& ca = correspondences.entries[sample[a]];
          const Correspondence& cb = correspondences.entries[sample[b]];
          if (sample[a] == sample[b] || ca.scene_index == cb.scene_index) valid = false;
        }
    }
    if (!valid)
      throw Error(ErrorCode::NoConsensus, "could not draw a non-degenerate sample");

    for (size_t j = 0; j < n; ++j) {
      const Correspondence& c = correspondences.entries[sample[j]];
      sample_obj[j] = object_points[size_t(c.object_index)];
      sample_scn[j] = scene_points[size_t(c.scene_index)];
    }

    if (cfg.prefilter_enabled) {
      bool reject = false;
      try {
        const Eigen::VectorXd delta = polygon_dissimilarity(sample_obj, sample_scn);
        reject = delta.lpNorm<Eigen::Infinity>() > cfg.t_poly;
      } catch (const Error&) {
        ++result.degenerate_samples;
        continue;
      }
      if (reject) {
        ++result.rejected_polygon;
        continue;
      }
    }

    RigidTransform hypothesis;
    try {
      ++result.estimations;
      hypothesis = estimate_rigid_transform(sample_obj, sample_scn);
    } catch (const Error&) {
      ++result.degenerate_samples;
      continue;
    }

    // Support: object points whose nearest scene point (under the hypothesis)
    // is within inlier_dist. Abandon as soon as the quorum is unreachable.
    inlier_obj.clear();
    inlier_scn.clear();
    const double inlier_dist_sq = cfg.inlier_dist * cfg.inlier_dist;
    std::int64_t remaining = std::int64_t(object_points.size());
    for (size_t i = 0; i < object_points.size(); ++i, --remaining) {
      if (std::int64_t(inlier_obj.size()) + remaining < required_inliers) break;
      const Point3 moved = apply_transform(hypothesis, object_points[i]);
      const KdTree3::Hit hit = scene_tree.nearest(moved);
      if (hit.dist_sq <= inlier_dist_sq) {
        inlier_obj.push_back(object_points[i]);
        inlier_scn.push_back(scene_points[size_t(hit.index)]);
      }
    }
    if (std::int64_t(inlier_obj.size()) < required_inliers) {
      ++result.rejected_inliers;
      continue;
    }

    RigidTransform refined;
    try {
      ++result.estimations;
      refined = estimate_rigid_transform(inlier_obj, inlier_scn);
    } catch (const Error&) {
      ++result.degenerate_samples;
      continue;
    }
    double fit = 0.0;
    for (size_t i = 0; i < inlier_obj.size(); ++i)
      fit += (apply_transform(refined, inlier_obj[i]) - inlier_scn[i]).norm();
    fit /= double(inlier_obj.size());

    if (fit < result.mean_fit) {
      result.success = true;
      result.pose = refined;
      result.inlier_count = std::int64_t(inlier_obj.size());
      result.mean_fit = fit;
      result.best_iteration = iter;
    }
    if (cfg.convergence_error > 0.0 && result.mean_fit < cfg.convergence_error) break;
  }

  result.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline RansacResult ransac_register(const std::vector<Point3>& object_points,
                                    const std::vector<Point3>& scene_points,
                                    const CorrespondenceSet& correspondences,
                                    const RansacConfig& cfg) {
  return ransac_register(std::span<const Point3>(object_points),
                         std::span<const Point3>(scene_points), correspondences, cfg);
}

inline std::vector<Point3> primitive_positions(std::span<const Primitive> primitives) {
  std::vector<Point3> out;
  out.reserve(primitives.size());
  for (const Primitive& p : primitives) out.push_back(p.position);
  return out;
}

/// Full registration front end: match descriptors once, then run the
/// consensus loop over the matched pairs. Throws NoConsensus when no pose
/// reaches the inlier quorum.
inline RansacResult register_models(std::span<const Primitive> object,
                                    std::span<const ContextDescriptor> object_descriptors,
                                    std::span<const Primitive> scene,
                                    std::span<const ContextDescriptor> scene_descriptors,
                                    const RansacConfig& cfg,
                                    const MatchParams& match_params = {}) {
  const CorrespondenceSet correspondences =
      match_descriptors(object_descriptors, scene_descriptors, match_params);
  if (correspondences.entries.empty())
    throw Error(ErrorCode::NoCandidates, "descriptor matching produced no correspondences");
  const std::vector<Point3> obj_pts = primitive_positions(object);
  const std::vector<Point3> scn_pts = primitive_positions(scene);
  RansacResult result = ransac_register(obj_pts, scn_pts, correspondences, cfg);
  if (!result.success)
    throw Error(ErrorCode::NoConsensus, "no hypothesis reached the inlier quorum");
  return result;
}

}  // namespace ecvpose
