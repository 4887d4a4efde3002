#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/geometry.hpp"

namespace ecvpose {

/// Static 3-D kd-tree over point positions. Median split on the widest axis,
/// small leaves scanned linearly. Ties in query distance resolve to the lowest
/// point index so results do not depend on tree layout.
class KdTree3 {
 public:
  struct Hit {
    int index = -1;
    double dist_sq = std::numeric_limits<double>::infinity();
  };

  explicit KdTree3(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorCode::EmptyInput, "KdTree3 over empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(points_.size() / kLeafSize * 2 + 2);
    root_ = build(0, int(points_.size()));
  }

  size_t size() const { return points_.size(); }
  const Point3& point(int i) const { return points_[size_t(i)]; }

  Hit nearest(const Point3& query) const {
    Hit best;
    search(root_, query, best);
    return best;
  }

  /// Indices of all points with ||p - query|| <= radius, in ascending index order.
  std::vector<int> radius_search(const Point3& query, double radius) const {
    std::vector<int> out;
    radius_collect(root_, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    double split = 0.0;
    int axis = -1;  // -1 marks a leaf
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range in order_
    Eigen::Vector3d lo, hi;  // bounding box
  };

  int build(int begin, int end) {
    Node node;
    node.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (int i = begin; i < end; ++i) {
      node.lo = node.lo.cwiseMin(points_[size_t(order_[size_t(i)])]);
      node.hi = node.hi.cwiseMax(points_[size_t(order_[size_t(i)])]);
    }
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return int(nodes_.size()) - 1;
    }
    Eigen::Vector3d extent = node.hi - node.lo;
    int axis = 0;
    extent.maxCoeff(&axis);
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       double pa = points_[size_t(a)](axis), pb = points_[size_t(b)](axis);
                       return pa < pb || (pa == pb && a < b);
                     });
    node.axis = axis;
    node.split = points_[size_t(order_[size_t(mid)])](axis);
    int self = int(nodes_.size());
    nodes_.push_back(node);
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[size_t(self)].left = left;
    nodes_[size_t(self)].right = right;
    return self;
  }

  double box_dist_sq(const Node& node, const Point3& q) const {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      double v = std::max({node.lo(a) - q(a), 0.0, q(a) - node.hi(a)});
      d += v * v;
    }
    return d;
  }

  void search(int node_id, const Point3& q, Hit& best) const {
    const Node& node = nodes_[size_t(node_id)];
    if (box_dist_sq(node, q) > best.dist_sq) return;
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int idx = order_[size_t(i)];
        double d = (points_[size_t(idx)] - q).squaredNorm();
        if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) {
          best.dist_sq = d;
          best.index = idx;
        }
      }
      return;
    }
    int near = q(node.axis) < node.split ? node.left : node.right;
    int far = near == node.left ? node.right : node.left;
    search(near, q, best);
    search(far, q, best);
  }

  void radius_collect(int node_id, const Point3& q, double radius_sq,
                      std::vector<int>& out) const {
    const Node& node = nodes_[size_t(node_id)];
    if (box_dist_sq(node, q) > radius_sq) return;
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int idx = order_[size_t(i)];
        if ((points_[size_t(idx)] - q).squaredNorm() <= radius_sq) out.push_back(idx);
      }
      return;
    }
    radius_collect(node.left, q, radius_sq, out);
    radius_collect(node.right, q, radius_sq, out);
  }

  std::vector<Point3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

}  // namespace ecvpose
