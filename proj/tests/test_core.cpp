#include <gtest/gtest.h>

#include <mutex>
#include <random>

#include "ecvpose/geometry.hpp"
#include "ecvpose/kdtree.hpp"
#include "ecvpose/util.hpp"
#include "helpers.hpp"

using namespace ecvpose;

namespace {

RigidTransform rz90(const Point3& t = Point3::Zero()) {
  return RigidTransform::from_axis_angle({0, 0, 1}, M_PI / 2.0, t);
}

}  // namespace

// ---------------------------------------------------------------------------
// rigid transforms

TEST(Geometry, IdentityLeavesPointsFixed) {
  const Point3 p{1, 2, 3};
  const Point3 q = apply_transform(RigidTransform::identity(), p);
  EXPECT_EQ(q, p);
}

TEST(Geometry, Rz90MapsXAxisToYAxis) {
  const Point3 q = apply_transform(rz90(), {1, 0, 0});
  EXPECT_NEAR(q.x(), 0.0, 1e-12);
  EXPECT_NEAR(q.y(), 1.0, 1e-12);
  EXPECT_NEAR(q.z(), 0.0, 1e-12);
}

TEST(Geometry, Rz90WithTranslation) {
  const Point3 q = apply_transform(rz90({1, 1, 1}), {1, 0, 0});
  EXPECT_NEAR(q.x(), 1.0, 1e-12);
  EXPECT_NEAR(q.y(), 2.0, 1e-12);
  EXPECT_NEAR(q.z(), 1.0, 1e-12);
}

TEST(Geometry, TransformsAreIsometries) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform t = testutil::random_transform(rng);
    EXPECT_NEAR(std::abs(t.rotation.determinant() - 1.0), 0.0, 1e-12);
    const Point3 p = testutil::random_cloud(rng, 1, 2.0)[0];
    const Point3 q = testutil::random_cloud(rng, 1, 2.0)[0];
    const double before = (p - q).norm();
    const double after = (apply_transform(t, p) - apply_transform(t, q)).norm();
    EXPECT_NEAR(before, after, 1e-9);
  }
}

TEST(Geometry, ComposeAppliesRightThenLeft) {
  const RigidTransform a = rz90({1, 0, 0});
  const RigidTransform b = rz90();
  const RigidTransform ab = compose(a, b);
  std::mt19937_64 rng(3);
  for (const Point3& p : testutil::random_cloud(rng, 10, 2.0)) {
    const Point3 expect = apply_transform(a, apply_transform(b, p));
    EXPECT_LT((apply_transform(ab, p) - expect).norm(), 1e-12);
  }
}

TEST(Geometry, InverseUndoesTransform) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform t = testutil::random_transform(rng);
    const RigidTransform round = compose(inverse(t), t);
    EXPECT_LT((round.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(round.translation.cwiseAbs().maxCoeff(), 1e-12);
    // the acos in the angle metric floors out around sqrt(eps)
    EXPECT_LT(pose_delta(round, RigidTransform::identity()), 1e-7);
  }
}

TEST(Geometry, RotationAngleOfKnownRotations) {
  EXPECT_NEAR(rotation_angle(RigidTransform::identity().rotation), 0.0, 1e-12);
  EXPECT_NEAR(rotation_angle(rz90().rotation), M_PI / 2.0, 1e-12);
  const RigidTransform half = RigidTransform::from_axis_angle({0, 1, 0}, 0.25);
  EXPECT_NEAR(rotation_angle(half.rotation), 0.25, 1e-12);
}

TEST(Geometry, Matrix4HasUnitBottomRow) {
  const Eigen::Matrix4d m = rz90({1, 2, 3}).matrix();
  EXPECT_EQ(m(3, 0), 0.0);
  EXPECT_EQ(m(3, 1), 0.0);
  EXPECT_EQ(m(3, 2), 0.0);
  EXPECT_EQ(m(3, 3), 1.0);
  EXPECT_NEAR(m(0, 3), 1.0, 1e-12);
  EXPECT_NEAR(m(2, 3), 3.0, 1e-12);
}

// ---------------------------------------------------------------------------
// closed-form alignment

TEST(Estimate, IdenticalCloudsGiveIdentity) {
  std::mt19937_64 rng(5);
  const std::vector<Point3> pts = testutil::random_cloud(rng, 6, 1.0);
  const RigidTransform t = estimate_rigid_transform(pts, pts);
  EXPECT_LT(pose_delta(t, RigidTransform::identity()), 1e-12);
}

TEST(Estimate, RecoversExactTransform) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + int(rng() % 40);
    const std::vector<Point3> src = testutil::random_cloud(rng, n, 1.0);
    const RigidTransform truth = testutil::random_transform(rng);
    std::vector<Point3> dst;
    for (const Point3& p : src) dst.push_back(apply_transform(truth, p));
    const RigidTransform est = estimate_rigid_transform(src, dst);
    EXPECT_LT((est.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((est.translation - truth.translation).cwiseAbs().maxCoeff(), 1e-9);
    for (size_t i = 0; i < src.size(); ++i)
      EXPECT_LT((apply_transform(est, src[i]) - dst[i]).norm(), 1e-9);
  }
}

TEST(Estimate, RotationStaysProper) {
  // a reflection-like correspondence must still produce det(R) = +1
  std::vector<Point3> src{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.2, 0.1, 0.4}};
  std::vector<Point3> dst{{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-0.2, 0.1, 0.4}};
  const RigidTransform est = estimate_rigid_transform(src, dst);
  EXPECT_NEAR(est.rotation.determinant(), 1.0, 1e-9);
}

TEST(Estimate, CollinearPointsThrowDegenerateGeometry) {
  std::vector<Point3> src{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  std::vector<Point3> dst = src;
  testutil::expect_error(ErrorCode::DegenerateGeometry,
                         [&] { estimate_rigid_transform(src, dst); });
}

TEST(Estimate, SizeMismatchAndTooFewPointsThrow) {
  std::vector<Point3> a{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  std::vector<Point3> b{{0, 0, 0}, {1, 0, 0}};
  testutil::expect_error(ErrorCode::DegenerateGeometry, [&] { estimate_rigid_transform(a, b); });
  std::vector<Point3> two{{0, 0, 0}, {1, 0, 0}};
  testutil::expect_error(ErrorCode::DegenerateGeometry, [&] { estimate_rigid_transform(two, two); });
}

TEST(Estimate, BeatsPerturbedCandidatesOnNoisyData) {
  // least-squares optimality: no small pose perturbation may improve the
  // summed squared residual of the estimate
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 0.01);
  const std::vector<Point3> src = testutil::random_cloud(rng, 40, 1.0);
  const RigidTransform truth = testutil::random_transform(rng, 0.5, 0.3);
  std::vector<Point3> dst;
  for (const Point3& p : src)
    dst.push_back(apply_transform(truth, p) + Point3(noise(rng), noise(rng), noise(rng)));

  const RigidTransform est = estimate_rigid_transform(src, dst);
  auto residual = [&](const RigidTransform& t) {
    double sum = 0.0;
    for (size_t i = 0; i < src.size(); ++i)
      sum += (apply_transform(t, src[i]) - dst[i]).squaredNorm();
    return sum;
  };
  const double base = residual(est);
  EXPECT_LE(base, residual(truth) + 1e-15);
  for (int k = 0; k < 200; ++k) {
    const double eps = (k % 2 == 0) ? 1e-3 : 1e-2;
    const RigidTransform jigged =
        compose(RigidTransform::from_axis_angle(testutil::random_unit_vector(rng), eps,
                                                eps * testutil::random_unit_vector(rng)),
                est);
    EXPECT_LE(base, residual(jigged) + 1e-12);
  }
}

TEST(Estimate, AlignmentErrorIsMeanDistance) {
  std::vector<std::pair<Point3, Point3>> pairs{{{0, 0, 0}, {0.01, 0, 0}},
                                               {{1, 0, 0}, {1.03, 0, 0}}};
  EXPECT_NEAR(alignment_error(RigidTransform::identity(), pairs), 0.02, 1e-12);
  std::vector<std::pair<Point3, Point3>> empty;
  testutil::expect_error(ErrorCode::EmptyInput,
                         [&] { alignment_error(RigidTransform::identity(), empty); });
}

TEST(Estimate, PoseDeltaCombinesRotationAndTranslation) {
  const RigidTransform a = RigidTransform::identity();
  const RigidTransform b = RigidTransform::from_axis_angle({1, 0, 0}, 0.1, {0.2, 0, 0});
  EXPECT_NEAR(pose_delta(a, b), 0.1 + 0.2, 1e-12);
}

// ---------------------------------------------------------------------------
// kd-tree

TEST(KdTree, MatchesLinearScanNearest) {
  std::mt19937_64 rng(31);
  const std::vector<Point3> pts = testutil::random_cloud(rng, 1000, 2.0);
  const KdTree3 tree(pts);
  for (int k = 0; k < 200; ++k) {
    const Point3 q = testutil::random_cloud(rng, 1, 3.0)[0];
    int best = -1;
    double best_sq = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pts.size(); ++i) {
      const double d = (pts[i] - q).squaredNorm();
      if (d < best_sq) {
        best_sq = d;
        best = int(i);
      }
    }
    const KdTree3::Hit hit = tree.nearest(q);
    EXPECT_EQ(hit.index, best);
    EXPECT_DOUBLE_EQ(hit.dist_sq, best_sq);
  }
}

TEST(KdTree, TiesResolveToLowestIndex) {
  std::vector<Point3> pts{{1, 0, 0}, {-1, 0, 0}, {1, 0, 0}, {0, 2, 0}};
  const KdTree3 tree(pts);
  const KdTree3::Hit hit = tree.nearest({1.1, 0, 0});
  EXPECT_EQ(hit.index, 0);  // index 2 is equally near
  const KdTree3::Hit mid = tree.nearest({0, 0, 0});
  EXPECT_EQ(mid.index, 0);  // indices 0, 1, 2 all at distance 1
}

TEST(KdTree, RadiusSearchMatchesBruteForce) {
  std::mt19937_64 rng(37);
  const std::vector<Point3> pts = testutil::random_cloud(rng, 500, 1.0);
  const KdTree3 tree(pts);
  for (int k = 0; k < 50; ++k) {
    const Point3 q = testutil::random_cloud(rng, 1, 1.2)[0];
    const double r = 0.05 + 0.3 * testutil::unit_double(rng);
    std::vector<int> expect;
    for (size_t i = 0; i < pts.size(); ++i)
      if ((pts[i] - q).norm() <= r) expect.push_back(int(i));
    EXPECT_EQ(tree.radius_search(q, r), expect);
  }
}

TEST(KdTree, IncludesBoundaryPointsInRadius) {
  std::vector<Point3> pts{{0, 0, 0}, {0.5, 0, 0}, {1, 0, 0}};
  const KdTree3 tree(pts);
  const std::vector<int> got = tree.radius_search({0, 0, 0}, 0.5);
  EXPECT_EQ(got, (std::vector<int>{0, 1}));
}

TEST(KdTree, EmptyInputThrows) {
  testutil::expect_error(ErrorCode::EmptyInput, [] { KdTree3(std::vector<Point3>{}); });
}

TEST(KdTree, SinglePoint) {
  const KdTree3 tree(std::vector<Point3>{{1, 2, 3}});
  EXPECT_EQ(tree.nearest({0, 0, 0}).index, 0);
  EXPECT_EQ(tree.radius_search({1, 2, 3}, 0.0), std::vector<int>{0});
}

// ---------------------------------------------------------------------------
// utilities

TEST(Util, Splitmix64MatchesReferenceVectors) {
  // published sequence for the standard splitmix64 stream seeded at 0
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(splitmix64(0x9E3779B97F4A7C15ull), 0x6E789E6AA1B965F4ull);
}

TEST(Util, HashUnitStaysInHalfOpenInterval) {
  double mean = 0.0;
  for (uint64_t i = 0; i < 10000; ++i) {
    const double v = hash_unit(i);
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    mean += v;
  }
  mean /= 10000.0;
  EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(Util, ResolveThreadsIsAtLeastOne) {
  EXPECT_GE(resolve_threads(0), 1);
  EXPECT_EQ(resolve_threads(3), 3);
  EXPECT_EQ(resolve_threads(-2), resolve_threads(0));
}

TEST(Util, ParallelForPartitionsExactly) {
  for (size_t count : {0ul, 1ul, 7ul, 64ul, 1001ul}) {
    for (int threads : {1, 2, 3, 8}) {
      std::vector<int> touched(count, 0);
      std::mutex m;
      parallel_for(count, threads, [&](size_t begin, size_t end) {
        std::lock_guard<std::mutex> lock(m);
        for (size_t i = begin; i < end; ++i) ++touched[i];
      });
      for (size_t i = 0; i < count; ++i)
        ASSERT_EQ(touched[i], 1) << "count=" << count << " threads=" << threads << " i=" << i;
    }
  }
}
