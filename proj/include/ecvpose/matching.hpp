#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "ecvpose/descriptor.hpp"
#include "ecvpose/error.hpp"
#include "ecvpose/util.hpp"

namespace ecvpose {

struct Correspondence {
  int object_index = -1;  // primitive index in the object model
  int scene_index = -1;   // primitive index in the scene model
  double distance = 0.0;  // Euclidean descriptor distance
};

/// One best scene match per object descriptor, stored in ascending
/// object-index order.
struct CorrespondenceSet {
  std::vector<Correspondence> entries;
  int omitted_no_candidates = 0;
  int omitted_by_ratio = 0;
};

/// Exact nearest-neighbor index over 96-D descriptors (linear scan with early
/// abandonment; ties resolve to the lowest stored position).
class DescriptorIndex {
 public:
  struct Neighbor {
    int index = -1;  // position in the list the index was built from
    double distance = std::numeric_limits<double>::infinity();
  };

  explicit DescriptorIndex(std::span<const ContextDescriptor> descriptors) {
    if (descriptors.empty())
      throw Error(ErrorCode::EmptyInput, "DescriptorIndex over empty descriptor list");
    data_.reserve(descriptors.size());
    for (const ContextDescriptor& d : descriptors) data_.push_back(d.values);
  }
  explicit DescriptorIndex(const std::vector<ContextDescriptor>& descriptors)
      : DescriptorIndex(std::span<const ContextDescriptor>(descriptors)) {}

  size_t size() const { return data_.size(); }

  Neighbor nearest(const DescriptorVector& query) const {
    Neighbor best;
    double best_sq = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < data_.size(); ++i) {
      const double d = bounded_dist_sq(query, data_[i], best_sq);
      if (d < best_sq) {
        best_sq = d;
        best.index = int(i);
      }
    }
    best.distance = std::sqrt(best_sq);
    return best;
  }

  /// k nearest neighbors, ascending distance, ties by lower index.
  std::vector<Neighbor> knn(const DescriptorVector& query, int k) const {
    std::vector<Neighbor> all(data_.size());
    for (size_t i = 0; i < data_.size(); ++i)
      all[i] = {int(i), (query - data_[i]).norm()};
    const size_t kk = std::min(size_t(k), all.size());
    std::partial_sort(all.begin(), all.begin() + long(kk), all.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                        return a.distance != b.distance ? a.distance < b.distance
                                                        : a.index < b.index;
                      });
    all.resize(kk);
    return all;
  }

 private:
  static double bounded_dist_sq(const DescriptorVector& a, const DescriptorVector& b,
                                double bound) {
    double sum = 0.0;
    for (int i = 0; i < kDescriptorDim; ++i) {
      const double d = a(i) - b(i);
      sum += d * d;
      if (sum > bound) return sum;
    }
    return sum;
  }

  std::vector<DescriptorVector> data_;
};

struct MatchParams {
  bool same_kind_only = true;
  double lowe_ratio = 0.0;  // 0 disables the ratio filter
  int threads = 1;
};

/// Nearest-neighbor correspondence search object -> scene. With same_kind_only
/// an object descriptor only matches scene descriptors of equal structure
/// kind; objects with no admissible candidates are omitted and counted.
inline CorrespondenceSet match_descriptors(std::span<const ContextDescriptor> object,
                                           std::span<const ContextDescriptor> scene,
                                           const MatchParams& params = {}) {
  if (object.empty() || scene.empty())
    throw Error(ErrorCode::EmptyInput, "match_descriptors needs non-empty descriptor lists");

  // Scene descriptors partitioned by kind; original positions kept so a
  // filtered query still reports the true scene index.
  struct KindIndex {
    std::vector<int> scene_positions;
    std::unique_ptr<DescriptorIndex> index;
  };
  auto build_kind = [&](auto admit) {
    KindIndex ki;
    std::vector<ContextDescriptor> subset;
    for (size_t i = 0; i < scene.size(); ++i)
      if (admit(scene[i])) {
        ki.scene_positions.push_back(int(i));
        subset.push_back(scene[i]);
      }
    if (!subset.empty()) ki.index = std::make_unique<DescriptorIndex>(subset);
    return ki;
  };

  KindIndex all_index, segment_index, texlet_index;
  if (params.same_kind_only) {
    segment_index = build_kind(
        [](const ContextDescriptor& d) { return d.kind == PrimitiveKind::Segment; });
    texlet_index =
        build_kind([](const ContextDescriptor& d) { return d.kind == PrimitiveKind::Texlet; });
  } else {
    all_index = build_kind([](const ContextDescriptor&) { return true; });
  }

  struct Slot {
    Correspondence corr;
    enum { Matched, NoCandidate, RatioFiltered } state = NoCandidate;
  };
  std::vector<Slot> slots(object.size());
  parallel_for(object.size(), params.threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const ContextDescriptor& od = object[i];
      const KindIndex& ki = !params.same_kind_only ? all_index
                            : od.kind == PrimitiveKind::Segment ? segment_index
                                                                : texlet_index;
      if (!ki.index) {
        slots[i].state = Slot::NoCandidate;
        continue;
      }
      if (params.lowe_ratio > 0.0 && ki.index->size() >= 2) {
        auto nn = ki.index->knn(od.values, 2);
        if (nn[0].distance > params.lowe_ratio * nn[1].distance) {
          slots[i].state = Slot::RatioFiltered;
          continue;
        }
        slots[i].corr = {od.source_index, scene[size_t(ki.scene_positions[size_t(nn[0].index)])].source_index,
                         nn[0].distance};
        slots[i].state = Slot::Matched;
      } else {
        auto nn = ki.index->nearest(od.values);
        slots[i].corr = {od.source_index, scene[size_t(ki.scene_positions[size_t(nn.index)])].source_index,
                         nn.distance};
        slots[i].state = Slot::Matched;
      }
    }
  });

  CorrespondenceSet out;
  out.entries.reserve(object.size());
  for (const Slot& s : slots) {
    if (s.state == Slot::Matched)
      out.entries.push_back(s.corr);
    else if (s.state == Slot::NoCandidate)
      ++out.omitted_no_candidates;
    else
      ++out.omitted_by_ratio;
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const Correspondence& a, const Correspondence& b) {
              return a.object_index < b.object_index;
            });
  return out;
}

inline CorrespondenceSet match_descriptors(const std::vector<ContextDescriptor>& object,
                                           const std::vector<ContextDescriptor>& scene,
                                           const MatchParams& params = {}) {
  return match_descriptors(std::span<const ContextDescriptor>(object),
                           std::span<const ContextDescriptor>(scene), params);
}

}  // namespace ecvpose
