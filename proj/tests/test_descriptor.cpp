#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "ecvpose/descriptor.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace ecvpose;

namespace {

Primitive prim(const Point3& pos, const Eigen::Vector3d& ori,
               const Eigen::Vector3d& color = {0.5, 0.5, 0.5},
               PrimitiveKind kind = PrimitiveKind::Texlet) {
  Primitive p;
  p.position = pos;
  p.orientation = ori.normalized();
  p.color = color;
  p.kind = kind;
  return p;
}

void expect_descriptors_equal(const std::vector<ContextDescriptor>& a,
                              const std::vector<ContextDescriptor>& b, double tol = 0.0) {
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].source_index, b[i].source_index);
    ASSERT_EQ(a[i].kind, b[i].kind);
    for (int k = 0; k < kDescriptorDim; ++k) {
      if (tol == 0.0)
        ASSERT_EQ(a[i].values(k), b[i].values(k)) << "descriptor " << i << " bin " << k;
      else
        ASSERT_NEAR(a[i].values(k), b[i].values(k), tol) << "descriptor " << i << " bin " << k;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// pairwise relations

TEST(Relations, HandComputedGeometricExample) {
  // o1 = (1,0,0), o2 = (0.6,0.8,0), baseline along (1,1,0)/sqrt(2)
  const Point3 p1(0, 0, 0);
  const Point3 p2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0);
  const GeometricRelations g =
      geometric_relations(p1, {1, 0, 0}, p2, {0.6, 0.8, 0});
  EXPECT_NEAR(g.rg1, 0.6, 1e-12);
  EXPECT_NEAR(g.rg2, 0.70711, 1e-5);
  EXPECT_NEAR(g.rg3, 0.98995, 1e-5);
  // full-precision values
  EXPECT_NEAR(g.rg2, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(g.rg3, 1.4 / std::sqrt(2.0), 1e-12);
}

TEST(Relations, ParallelOrientationsAlongBaseline) {
  const GeometricRelations g =
      geometric_relations({0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 0, 1});
  EXPECT_NEAR(g.rg1, 1.0, 1e-12);
  EXPECT_NEAR(g.rg2, 1.0, 1e-12);
  EXPECT_NEAR(g.rg3, 1.0, 1e-12);
}

TEST(Relations, CoincidentPointsThrow) {
  testutil::expect_error(ErrorCode::CoincidentPoints, [] {
    geometric_relations({1, 2, 3}, {1, 0, 0}, {1, 2, 3}, {0, 1, 0});
  });
}

TEST(Relations, AppearanceIsSecondMinusFirst) {
  const Eigen::Vector3d d = appearance_relations({0.2, 0.5, 0.9}, {0.7, 0.4, 0.9});
  EXPECT_NEAR(d(0), 0.5, 1e-12);
  EXPECT_NEAR(d(1), -0.1, 1e-12);
  EXPECT_NEAR(d(2), 0.0, 1e-12);
  EXPECT_EQ(appearance_relations({1, 1, 1}, {1, 1, 1}), Eigen::Vector3d::Zero());
}

TEST(Relations, PairOrderingPutsNearerFirst) {
  std::vector<Primitive> prims{prim({0, 0, 0}, {1, 0, 0}), prim({3, 0, 0}, {1, 0, 0}),
                               prim({1, 0, 0}, {1, 0, 0})};
  const Point3 source = prims[0].position;
  EXPECT_EQ(order_pair(source, prims, 1, 2), (std::pair<int, int>{2, 1}));
  EXPECT_EQ(order_pair(source, prims, 2, 1), (std::pair<int, int>{2, 1}));
}

TEST(Relations, EquidistantTieBreaksToSmallerIndex) {
  std::vector<Primitive> prims{prim({0, 0, 0}, {1, 0, 0}), prim({1, 0, 0}, {1, 0, 0}),
                               prim({-1, 0, 0}, {1, 0, 0})};
  const Point3 source = prims[0].position;
  EXPECT_EQ(order_pair(source, prims, 2, 1), (std::pair<int, int>{1, 2}));
  EXPECT_EQ(order_pair(source, prims, 1, 2), (std::pair<int, int>{1, 2}));
}

TEST(Relations, BinLayoutCoversMinusOneToOne) {
  EXPECT_EQ(detail::relation_bin(-1.0), 0);
  EXPECT_EQ(detail::relation_bin(-1.0 + 1e-12), 0);
  EXPECT_EQ(detail::relation_bin(-0.875 - 1e-12), 0);
  EXPECT_EQ(detail::relation_bin(-0.875 + 1e-12), 1);
  EXPECT_EQ(detail::relation_bin(0.0), 8);
  EXPECT_EQ(detail::relation_bin(-1e-12), 7);
  EXPECT_EQ(detail::relation_bin(0.999), 15);
  EXPECT_EQ(detail::relation_bin(1.0), 15);  // the closed upper edge folds into the top bin
  EXPECT_EQ(detail::relation_bin(2.0), 15);  // out-of-range input clamps
  EXPECT_EQ(detail::relation_bin(-2.0), 0);
}

// ---------------------------------------------------------------------------
// single descriptors

TEST(Descriptor, SinglePairGivesOneHotHistograms) {
  // two primitives, identical colors, orientations perpendicular to the
  // baseline and parallel to each other
  std::vector<Primitive> prims{prim({0, 0, 0}, {0, 0, 1}, {0.3, 0.3, 0.3}),
                               prim({0.01, 0, 0}, {0, 0, 1}, {0.3, 0.3, 0.3})};
  const ContextDescriptor d = build_descriptor(0, prims, 0.025, 2);
  EXPECT_EQ(d.source_index, 0);
  // RG1 = 1 -> top bin; RG2 = RG3 = 0 -> bin 8; RA blocks all at bin 8
  std::array<int, 6> hot{15, 8, 8, 8, 8, 8};
  for (int h = 0; h < 6; ++h)
    for (int b = 0; b < kHistogramBins; ++b) {
      const double expect = b == hot[size_t(h)] ? 1.0 : 0.0;
      ASSERT_EQ(d.values(h * kHistogramBins + b), expect) << "block " << h << " bin " << b;
    }
}

TEST(Descriptor, BlockSumsAreOneAndBinsAreFrequencies) {
  std::mt19937_64 rng(15);
  const std::vector<Primitive> prims = testutil::random_primitives(rng, 120, 0.08);
  const std::vector<ContextDescriptor> all = build_all_descriptors(prims, 0.025, 5);
  ASSERT_FALSE(all.empty());
  for (const ContextDescriptor& d : all)
    for (int h = 0; h < 6; ++h) {
      double sum = 0.0;
      for (int b = 0; b < kHistogramBins; ++b) {
        const double v = d.values(h * kHistogramBins + b);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        sum += v;
      }
      ASSERT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(Descriptor, MatchesBruteForceOracleBitForBit) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 80 + int(rng() % 120);
    const std::vector<Primitive> prims = testutil::random_primitives(rng, n, 0.09);
    const std::vector<ContextDescriptor> lib = build_all_descriptors(prims, 0.025, 5);
    const std::vector<ContextDescriptor> ref = oracle::all_descriptors(prims, 0.025, 5);
    expect_descriptors_equal(lib, ref);
  }
}

TEST(Descriptor, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const std::vector<Primitive> prims = testutil::random_primitives(rng, 150, 0.09);
    const RigidTransform t = testutil::random_transform(rng);
    const std::vector<Primitive> moved = testutil::transform_primitives(t, prims);
    const std::vector<ContextDescriptor> a = build_all_descriptors(prims, 0.025, 5);
    const std::vector<ContextDescriptor> b = build_all_descriptors(moved, 0.025, 5);
    expect_descriptors_equal(a, b, 1e-9);
  }
}

TEST(Descriptor, InvariantUnderIndexPermutation) {
  std::mt19937_64 rng(47);
  const std::vector<Primitive> prims = testutil::random_primitives(rng, 100, 0.08);
  std::vector<int> perm(prims.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Primitive> shuffled(prims.size());
  for (size_t i = 0; i < prims.size(); ++i) shuffled[size_t(perm[i])] = prims[i];

  const std::vector<ContextDescriptor> a = build_all_descriptors(prims, 0.025, 5);
  const std::vector<ContextDescriptor> b = build_all_descriptors(shuffled, 0.025, 5);
  ASSERT_EQ(a.size(), b.size());
  // match up descriptors through the permutation: histograms are bit-identical
  for (const ContextDescriptor& d : a) {
    const int moved_index = perm[size_t(d.source_index)];
    const auto it = std::find_if(b.begin(), b.end(), [&](const ContextDescriptor& e) {
      return e.source_index == moved_index;
    });
    ASSERT_NE(it, b.end());
    for (int k = 0; k < kDescriptorDim; ++k) ASSERT_EQ(d.values(k), it->values(k));
  }
}

TEST(Descriptor, OrientationSignFlipMirrorsGeometricBins) {
  // mod-pi orientations: flipping one primitive's orientation vector negates
  // RG1 and RG3 of pairs it enters as the second member
  std::vector<Primitive> prims{prim({0, 0, 0}, {1, 0, 0}, {0.2, 0.2, 0.2}),
                               prim({0.012, 0.003, 0}, {0.3, 0.9, 0.1}, {0.8, 0.8, 0.8})};
  const GeometricRelations g = geometric_relations(
      prims[0].position, prims[0].orientation, prims[1].position, prims[1].orientation);
  const GeometricRelations flipped = geometric_relations(
      prims[0].position, prims[0].orientation, prims[1].position, -prims[1].orientation);
  EXPECT_NEAR(flipped.rg1, -g.rg1, 1e-12);
  EXPECT_NEAR(flipped.rg2, g.rg2, 1e-12);
  EXPECT_NEAR(flipped.rg3, -g.rg3, 1e-12);

  const ContextDescriptor before = build_descriptor(0, prims, 0.025, 2);
  prims[1].orientation = -prims[1].orientation;
  const ContextDescriptor after = build_descriptor(0, prims, 0.025, 2);
  // the RG1 histogram mirrors around the bin center
  for (int b = 0; b < kHistogramBins; ++b) {
    const double mirrored = after.values(kHistogramBins - 1 - b);
    ASSERT_EQ(before.values(b), mirrored) << "bin " << b;
  }
}

TEST(Descriptor, CoincidentPairsAreSkippedAndCounted) {
  std::mt19937_64 rng(53);
  std::vector<Primitive> prims = testutil::random_primitives(rng, 30, 0.02);
  prims.push_back(prims[0]);  // exact duplicate position
  DescriptorDiagnostics diag;
  const std::vector<ContextDescriptor> lib = build_all_descriptors(prims, 0.025, 5, &diag);
  EXPECT_GT(diag.skipped_coincident_pairs, 0);
  const std::vector<ContextDescriptor> ref = oracle::all_descriptors(prims, 0.025, 5);
  expect_descriptors_equal(lib, ref);
}

TEST(Descriptor, TooSparseNeighborhoodsThrowOrSkip) {
  std::vector<Primitive> prims{prim({0, 0, 0}, {1, 0, 0}), prim({10, 0, 0}, {1, 0, 0}),
                               prim({20, 0, 0}, {1, 0, 0})};
  testutil::expect_error(ErrorCode::InsufficientNeighbors,
                         [&] { build_descriptor(0, prims, 0.025, 2); });
  DescriptorDiagnostics diag;
  EXPECT_TRUE(build_all_descriptors(prims, 0.025, 2, &diag).empty());
  EXPECT_EQ(diag.skipped_insufficient_neighbors, 3);
}

TEST(Descriptor, EmptyInputGivesEmptyOutput) {
  EXPECT_TRUE(build_all_descriptors(std::vector<Primitive>{}, 0.025, 5).empty());
}

TEST(Descriptor, RejectsBadParameters) {
  std::vector<Primitive> prims{prim({0, 0, 0}, {1, 0, 0})};
  testutil::expect_error(ErrorCode::InvalidParameter,
                         [&] { build_descriptor(0, prims, 0.0, 2); });
  testutil::expect_error(ErrorCode::InvalidParameter,
                         [&] { build_descriptor(0, prims, 0.025, 1); });
  testutil::expect_error(ErrorCode::InvalidParameter,
                         [&] { build_descriptor(5, prims, 0.025, 2); });
  testutil::expect_error(ErrorCode::InvalidParameter, [&] {
    DescriptorParams params;
    params.radius = -1.0;
    build_all_descriptors(prims, params);
  });
}

TEST(Descriptor, ParallelBuildMatchesSequentialBitForBit) {
  std::mt19937_64 rng(59);
  const std::vector<Primitive> prims = testutil::random_primitives(rng, 400, 0.12);
  DescriptorParams seq;
  seq.threads = 1;
  DescriptorParams par;
  par.threads = 4;
  expect_descriptors_equal(build_all_descriptors(prims, seq), build_all_descriptors(prims, par));
}

TEST(Descriptor, TenPrimitiveNeighborhoodUsesAllPairs) {
  // 10 primitives inside one radius: C(10,2) = 45 pairs per descriptor, so
  // every histogram bin is a multiple of 1/45
  std::mt19937_64 rng(61);
  const std::vector<Primitive> prims = testutil::random_primitives(rng, 10, 0.012);
  const ContextDescriptor d = build_descriptor(0, prims, 0.025, 5);
  for (int h = 0; h < 6; ++h) {
    double sum = 0.0;
    for (int b = 0; b < kHistogramBins; ++b) {
      const double scaled = d.values(h * kHistogramBins + b) * 45.0;
      ASSERT_NEAR(scaled, std::round(scaled), 1e-9);
      sum += d.values(h * kHistogramBins + b);
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
  const auto ref = oracle::descriptor_for(0, prims, 0.025, 5);
  ASSERT_TRUE(ref.has_value());
  for (int k = 0; k < kDescriptorDim; ++k) ASSERT_EQ(d.values(k), ref->values(k));
}
