#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecvpose/descriptor.hpp"
#include "ecvpose/error.hpp"
#include "ecvpose/extract.hpp"
#include "ecvpose/geometry.hpp"
#include "ecvpose/icp.hpp"
#include "ecvpose/matching.hpp"
#include "ecvpose/ransac.hpp"

namespace ecvpose {

enum class Aligner { Icp, Ransac, RansacIcp };

struct CorrespondenceScore {
  std::int64_t c_hyp = 0;   // hypothesized (matched) pairs
  std::int64_t c_true = 0;  // pairs within threshold after alignment
  double score = 0.0;       // exact ratio c_true / c_hyp
  RigidTransform alignment;
};

struct ScoreParams {
  double threshold = 0.01;  // meters
  Aligner aligner = Aligner::RansacIcp;
  DescriptorParams descriptor;
  MatchParams match;
  RansacConfig ransac;
  IcpConfig icp;
};

/// Ground-truth-free correspondence quality: match descriptors between the
/// models, align the models independently of those matches, then count the
/// matched pairs whose aligned positions agree within the threshold.
inline CorrespondenceScore true_correspondence_score(std::span<const Primitive> object,
                                                     std::span<const Primitive> scene,
                                                     const ScoreParams& params = {}) {
  if (!(params.threshold > 0.0))
    throw Error(ErrorCode::InvalidParameter, "score threshold must be positive");

  const std::vector<ContextDescriptor> object_desc =
      build_all_descriptors(object, params.descriptor);
  const std::vector<ContextDescriptor> scene_desc =
      build_all_descriptors(scene, params.descriptor);
  if (object_desc.empty() || scene_desc.empty())
    throw Error(ErrorCode::AlignmentFailed, "a model yielded no descriptors");

  const CorrespondenceSet correspondences =
      match_descriptors(object_desc, scene_desc, params.match);
  if (correspondences.entries.empty())
    throw Error(ErrorCode::AlignmentFailed, "descriptor matching produced no correspondences");

  const std::vector<Point3> obj_pts = primitive_positions(object);
  const std::vector<Point3> scn_pts = primitive_positions(scene);

  RigidTransform alignment;
  try {
    switch (params.aligner) {
      case Aligner::Icp:
        alignment = icp_align(obj_pts, scn_pts, RigidTransform::identity(), params.icp).pose;
        break;
      case Aligner::Ransac: {
        const RansacResult r = ransac_register(obj_pts, scn_pts, correspondences, params.ransac);
        if (!r.success)
          throw Error(ErrorCode::NoConsensus, "no hypothesis reached the inlier quorum");
        alignment = r.pose;
        break;
      }
      case Aligner::RansacIcp: {
        const RansacResult r = ransac_register(obj_pts, scn_pts, correspondences, params.ransac);
        if (!r.success)
          throw Error(ErrorCode::NoConsensus, "no hypothesis reached the inlier quorum");
        alignment = icp_align(obj_pts, scn_pts, r.pose, params.icp).pose;
        break;
      }
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::AlignmentFailed,
                std::string("model alignment failed: ") + e.what());
  }

  CorrespondenceScore out;
  out.alignment = alignment;
  out.c_hyp = std::int64_t(correspondences.entries.size());
  for (const Correspondence& c : correspondences.entries) {
    const Point3 moved = apply_transform(alignment, obj_pts[size_t(c.object_index)]);
    if ((moved - scn_pts[size_t(c.scene_index)]).norm() <= params.threshold) ++out.c_true;
  }
  out.score = double(out.c_true) / double(out.c_hyp);
  return out;
}

inline CorrespondenceScore true_correspondence_score(const std::vector<Primitive>& object,
                                                     const std::vector<Primitive>& scene,
                                                     const ScoreParams& params = {}) {
  return true_correspondence_score(std::span<const Primitive>(object),
                                   std::span<const Primitive>(scene), params);
}

struct BenchmarkVariant {
  double mean_time_s = 0.0;
  double mean_fit_m = 0.0;
  double mean_inlier_count = 0.0;
  std::int64_t rejected_polygon = 0;  // summed over repeats
  std::int64_t rejected_inliers = 0;
  std::int64_t samples_drawn = 0;
  int successes = 0;
  std::vector<RansacResult> runs;
};

struct BenchmarkReport {
  int repeats = 0;
  std::int64_t iterations = 0;
  bool samples_drawn_equal = true;  // fairness: both variants saw the same draws
  BenchmarkVariant standard;  // prefilter off
  BenchmarkVariant modified;  // prefilter on
};

/// Paired comparison of the consensus loop with the polygon prefilter off and
/// on: identical correspondences, seeds, and sample sequences per repeat.
inline BenchmarkReport run_registration_benchmark(std::span<const Point3> object_points,
                                                  std::span<const Point3> scene_points,
                                                  const CorrespondenceSet& correspondences,
                                                  RansacConfig cfg, int repeats,
                                                  std::uint64_t base_seed = 7) {
  if (repeats < 1) throw Error(ErrorCode::InvalidParameter, "repeats must be >= 1");
  BenchmarkReport report;
  report.repeats = repeats;
  cfg.convergence_error = 0.0;  // identical iteration counts on both sides
  report.iterations = cfg.effective_iterations();

  auto accumulate = [](BenchmarkVariant& v, const RansacResult& r) {
    v.mean_time_s += r.elapsed_s;
    v.mean_fit_m += r.success ? r.mean_fit : 0.0;
    v.mean_inlier_count += double(r.inlier_count);
    v.rejected_polygon += r.rejected_polygon;
    v.rejected_inliers += r.rejected_inliers;
    v.samples_drawn += r.samples_drawn;
    v.successes += r.success ? 1 : 0;
    v.runs.push_back(r);
  };

  for (int rep = 0; rep < repeats; ++rep) {
    cfg.rng_seed = base_seed + std::uint64_t(rep);
    cfg.prefilter_enabled = false;
    const RansacResult standard = ransac_register(object_points, scene_points, correspondences, cfg);
    cfg.prefilter_enabled = true;
    const RansacResult modified = ransac_register(object_points, scene_points, correspondences, cfg);
    if (standard.samples_drawn != modified.samples_drawn) report.samples_drawn_equal = false;
    accumulate(report.standard, standard);
    accumulate(report.modified, modified);
  }

  for (BenchmarkVariant* v : {&report.standard, &report.modified}) {
    v->mean_time_s /= double(repeats);
    v->mean_inlier_count /= double(repeats);
    if (v->successes > 0) v->mean_fit_m /= double(v->successes);
  }
  return report;
}

}  // namespace ecvpose
