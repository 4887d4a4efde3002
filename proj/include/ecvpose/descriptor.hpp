#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/extract.hpp"
#include "ecvpose/kdtree.hpp"
#include "ecvpose/util.hpp"

namespace ecvpose {

inline constexpr int kHistogramBins = 16;
inline constexpr int kDescriptorDim = 6 * kHistogramBins;

using DescriptorVector = Eigen::Matrix<double, kDescriptorDim, 1>;

/// Semi-local context descriptor: six 16-bin relative-frequency histograms over
/// pairwise relations in a radius-r neighborhood, concatenated in the order
/// RG1, RG2, RG3, RA1, RA2, RA3.
struct ContextDescriptor {
  int source_index = -1;
  PrimitiveKind kind = PrimitiveKind::Texlet;
  DescriptorVector values = DescriptorVector::Zero();
};

struct GeometricRelations {
  double rg1 = 0, rg2 = 0, rg3 = 0;
};

/// Cosine relations between two oriented points: orientation-orientation and
/// each orientation against the normalized baseline p1 -> p2.
inline GeometricRelations geometric_relations(const Point3& p1, const Eigen::Vector3d& o1,
                                              const Point3& p2, const Eigen::Vector3d& o2) {
  const Eigen::Vector3d baseline = p2 - p1;
  const double len = baseline.norm();
  if (len < 1e-9)
    throw Error(ErrorCode::CoincidentPoints, "relation between coincident points");
  const Eigen::Vector3d dir = baseline / len;
  return {o1.dot(o2), o1.dot(dir), o2.dot(dir)};
}

/// Channel-wise color differences, second minus first.
inline Eigen::Vector3d appearance_relations(const Eigen::Vector3d& c1, const Eigen::Vector3d& c2) {
  return c2 - c1;
}

/// True when a comes first under the source-distance ordering rule
/// (nearer to the source first, ties to the smaller index).
inline bool pair_ordered(const Point3& source, const Point3& a, int a_index, const Point3& b,
                         int b_index) {
  const double da = (a - source).squaredNorm();
  const double db = (b - source).squaredNorm();
  if (da != db) return da < db;
  return a_index < b_index;
}

inline std::pair<int, int> order_pair(const Point3& source, std::span<const Primitive> primitives,
                                      int a_index, int b_index) {
  if (pair_ordered(source, primitives[size_t(a_index)].position, a_index,
                   primitives[size_t(b_index)].position, b_index))
    return {a_index, b_index};
  return {b_index, a_index};
}

struct DescriptorParams {
  double radius = 0.025;  // neighborhood radius, meters
  int min_neighbors = 5;
  int threads = 1;
};

struct DescriptorDiagnostics {
  int skipped_insufficient_neighbors = 0;
  int skipped_coincident_pairs = 0;
};

namespace detail {

inline int relation_bin(double value) {
  double v = std::clamp(value, -1.0, 1.0);
  int bin = int((v + 1.0) * (kHistogramBins / 2.0));
  return bin >= kHistogramBins ? kHistogramBins - 1 : bin;
}

// Neighbor indices must be in ascending order so the pair enumeration (and
// hence every accumulated count) is identical between the spatial-index path
// and the brute-force path.
inline std::optional<ContextDescriptor> descriptor_from_neighbors(
    int source_index, std::span<const Primitive> primitives, std::span<const int> neighbors,
    int min_neighbors, DescriptorDiagnostics* diag) {
  if (int(neighbors.size()) < min_neighbors) {
    if (diag) ++diag->skipped_insufficient_neighbors;
    return std::nullopt;
  }
  const Point3& source_pos = primitives[size_t(source_index)].position;

  std::array<std::array<int, kHistogramBins>, 6> counts{};
  long pairs = 0;
  for (size_t i = 0; i + 1 < neighbors.size(); ++i) {
    for (size_t j = i + 1; j < neighbors.size(); ++j) {
      int first = neighbors[i], second = neighbors[j];
      const Primitive* a = &primitives[size_t(first)];
      const Primitive* b = &primitives[size_t(second)];
      if ((a->position - b->position).squaredNorm() < 1e-18) {
        if (diag) ++diag->skipped_coincident_pairs;
        continue;
      }
      if (!pair_ordered(source_pos, a->position, first, b->position, second)) {
        std::swap(first, second);
        std::swap(a, b);
      }
      const GeometricRelations g =
          geometric_relations(a->position, a->orientation, b->position, b->orientation);
      const Eigen::Vector3d app = appearance_relations(a->color, b->color);
      ++counts[0][size_t(relation_bin(g.rg1))];
      ++counts[1][size_t(relation_bin(g.rg2))];
      ++counts[2][size_t(relation_bin(g.rg3))];
      ++counts[3][size_t(relation_bin(app(0)))];
      ++counts[4][size_t(relation_bin(app(1)))];
      ++counts[5][size_t(relation_bin(app(2)))];
      ++pairs;
    }
  }
  if (pairs == 0) {
    if (diag) ++diag->skipped_insufficient_neighbors;
    return std::nullopt;
  }

  ContextDescriptor desc;
  desc.source_index = source_index;
  desc.kind = primitives[size_t(source_index)].kind;
  for (int h = 0; h < 6; ++h)
    for (int b = 0; b < kHistogramBins; ++b)
      desc.values(h * kHistogramBins + b) = double(counts[size_t(h)][size_t(b)]) / double(pairs);
  return desc;
}

inline std::vector<int> neighbors_brute_force(int source_index,
                                              std::span<const Primitive> primitives,
                                              double radius) {
  const Point3& src = primitives[size_t(source_index)].position;
  const double r_sq = radius * radius;
  std::vector<int> out;
  for (size_t i = 0; i < primitives.size(); ++i)
    if ((primitives[i].position - src).squaredNorm() <= r_sq) out.push_back(int(i));
  return out;
}

}  // namespace detail

/// Descriptor for one source primitive; the neighborhood includes the source
/// itself and both structure kinds. Throws InsufficientNeighbors when the
/// neighborhood is too sparse.
inline ContextDescriptor build_descriptor(int source_index,
                                          std::span<const Primitive> primitives, double radius,
                                          int min_neighbors) {
  if (radius <= 0.0) throw Error(ErrorCode::InvalidParameter, "radius must be positive");
  if (min_neighbors < 2) throw Error(ErrorCode::InvalidParameter, "min_neighbors must be >= 2");
  if (source_index < 0 || source_index >= int(primitives.size()))
    throw Error(ErrorCode::InvalidParameter, "source index out of range");
  auto neighbors = detail::neighbors_brute_force(source_index, primitives, radius);
  auto desc =
      detail::descriptor_from_neighbors(source_index, primitives, neighbors, min_neighbors, nullptr);
  if (!desc)
    throw Error(ErrorCode::InsufficientNeighbors, "fewer than min_neighbors primitives in radius");
  return *desc;
}

/// Descriptors for every primitive that passes min_neighbors. Uses a spatial
/// index for the radius queries; output matches the brute-force pairwise scan
/// bit for bit.
inline std::vector<ContextDescriptor> build_all_descriptors(
    std::span<const Primitive> primitives, const DescriptorParams& params,
    DescriptorDiagnostics* diag = nullptr) {
  if (params.radius <= 0.0) throw Error(ErrorCode::InvalidParameter, "radius must be positive");
  if (params.min_neighbors < 2)
    throw Error(ErrorCode::InvalidParameter, "min_neighbors must be >= 2");
  if (primitives.empty()) return {};

  std::vector<Point3> positions;
  positions.reserve(primitives.size());
  for (const Primitive& p : primitives) positions.push_back(p.position);
  const KdTree3 tree(std::move(positions));

  std::vector<std::optional<ContextDescriptor>> slots(primitives.size());
  std::vector<DescriptorDiagnostics> per_chunk(primitives.size() ? size_t(resolve_threads(params.threads)) : 0);
  std::atomic<size_t> chunk_counter{0};
  parallel_for(primitives.size(), params.threads, [&](size_t begin, size_t end) {
    DescriptorDiagnostics local;
    for (size_t i = begin; i < end; ++i) {
      auto neighbors = tree.radius_search(primitives[i].position, params.radius);
      slots[i] = detail::descriptor_from_neighbors(int(i), primitives, neighbors,
                                                   params.min_neighbors, &local);
    }
    const size_t c = chunk_counter.fetch_add(1);
    if (c < per_chunk.size()) per_chunk[c] = local;
  });

  if (diag)
    for (const auto& d : per_chunk) {
      diag->skipped_insufficient_neighbors += d.skipped_insufficient_neighbors;
      diag->skipped_coincident_pairs += d.skipped_coincident_pairs;
    }

  std::vector<ContextDescriptor> out;
  out.reserve(primitives.size());
  for (auto& slot : slots)
    if (slot) out.push_back(std::move(*slot));
  return out;
}

inline std::vector<ContextDescriptor> build_all_descriptors(
    const std::vector<Primitive>& primitives, double radius, int min_neighbors,
    DescriptorDiagnostics* diag = nullptr) {
  DescriptorParams params;
  params.radius = radius;
  params.min_neighbors = min_neighbors;
  return build_all_descriptors(std::span<const Primitive>(primitives), params, diag);
}

}  // namespace ecvpose
