#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "focuskit/geometry.hpp"

namespace focuskit {

struct Neighbor {
  std::size_t index = 0;
  double dist2 = 0.0;
};

/// Static 3D k-d tree over a copy of the input points.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 8;

  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    if (!points_.empty()) build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Nearest point with squared distance <= max_dist2, smallest index on ties.
  std::optional<Neighbor> nearest(const Vec3& q, double max_dist2 = std::numeric_limits<double>::infinity()) const {
    if (points_.empty()) return std::nullopt;
    Neighbor best{std::numeric_limits<std::size_t>::max(), max_dist2};
    nearest_rec(0, q, best);
    if (best.index == std::numeric_limits<std::size_t>::max()) return std::nullopt;
    return best;
  }

  /// Number of points within `radius` of q (inclusive), excluding index
  /// `skip`. Stops early once `limit` is reached.
  std::size_t count_within(const Vec3& q, double radius, std::size_t limit = std::numeric_limits<std::size_t>::max(),
                           std::size_t skip = std::numeric_limits<std::size_t>::max()) const {
    if (points_.empty() || limit == 0) return 0;
    std::size_t count = 0;
    count_rec(0, q, radius * radius, limit, skip, count);
    return count;
  }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    Vec3 lo;
    Vec3 hi;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = lo;
    node.hi = hi;
    if (end - begin > kLeafSize) {
      Vec3 extent = hi - lo;
      int axis = 0;
      extent.maxCoeff(&axis);
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         const double pa = points_[a][axis];
                         const double pb = points_[b][axis];
                         return pa < pb || (pa == pb && a < b);
                       });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
    nodes_[id] = node;
    return id;
  }

  static double box_dist2(const Node& n, const Vec3& q) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = q[a] < n.lo[a] ? n.lo[a] - q[a] : (q[a] > n.hi[a] ? q[a] - n.hi[a] : 0.0);
      d2 += d * d;
    }
    return d2;
  }

  void nearest_rec(std::size_t id, const Vec3& q, Neighbor& best) const {
    const Node& n = nodes_[id];
    if (box_dist2(n, q) > best.dist2) return;
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) best = {idx, d2};
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    nearest_rec(go_left ? n.left : n.right, q, best);
    nearest_rec(go_left ? n.right : n.left, q, best);
  }

  void count_rec(std::size_t id, const Vec3& q, double r2, std::size_t limit, std::size_t skip,
                 std::size_t& count) const {
    if (count >= limit) return;
    const Node& n = nodes_[id];
    if (box_dist2(n, q) > r2) return;
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end && count < limit; ++i) {
        const std::size_t idx = order_[i];
        if (idx != skip && (points_[idx] - q).squaredNorm() <= r2) ++count;
      }
      return;
    }
    count_rec(n.left, q, r2, limit, skip, count);
    count_rec(n.right, q, r2, limit, skip, count);
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace focuskit
