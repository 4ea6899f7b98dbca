#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "mmrecon/geometry.hpp"

namespace mmrecon {

/// Exact k-nearest-neighbor index over a fixed point set.
/// Results are ordered by (squared distance, index), so equal distances resolve to
/// the lower index and queries agree exactly with an exhaustive scan.
class KdTree {
 public:
  struct Neighbor {
    double sq_dist;
    std::uint32_t index;
    bool operator<(const Neighbor& o) const {
      return sq_dist < o.sq_dist || (sq_dist == o.sq_dist && index < o.index);
    }
  };

  KdTree() = default;
  explicit KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (points_.empty()) return;
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, order_.size());
  }

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point3>& points() const noexcept { return points_; }

  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const {
    if (k > points_.size()) fail(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds " + std::to_string(points_.size()) + " points");
    std::vector<Neighbor> heap;  // max-heap on Neighbor order
    heap.reserve(k + 1);
    if (k > 0) search(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  Neighbor nearest(const Point3& query) const {
    if (points_.empty()) fail(ErrorCode::EmptyCloud, "nearest on empty tree");
    return knn(query, 1).front();
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
    Vec3 lo, hi;
  };

  int build(std::size_t begin, std::size_t end) {
    Node node;
    node.begin = static_cast<std::uint32_t>(begin);
    node.end = static_cast<std::uint32_t>(end);
    node.lo = node.hi = points_[order_[begin]];
    for (std::size_t i = begin; i < end; ++i) {
      node.lo = node.lo.cwiseMin(points_[order_[i]]);
      node.hi = node.hi.cwiseMax(points_[order_[i]]);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    int axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t a, std::uint32_t b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_sq_dist(const Node& n, const Point3& q) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double excess = std::max({n.lo[a] - q[a], 0.0, q[a] - n.hi[a]});
      d += excess * excess;
    }
    return d;
  }

  static double sq_dist(const Point3& a, const Point3& b) {
    const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
  }

  void search(int id, const Point3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    // Equal-distance boxes still get visited: they may hold a lower index.
    if (heap.size() == k && box_sq_dist(node, q) > heap.front().sq_dist) return;
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const Neighbor cand{sq_dist(points_[idx], q), idx};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const bool go_left = q[node.axis] < node.split;
    search(go_left ? node.left : node.right, q, k, heap);
    search(go_left ? node.right : node.left, q, k, heap);
  }

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// k nearest indices of `query` in `pc`, nearest first, ties to the lower index.
inline std::vector<std::uint32_t> knn(const OrientedPointCloud& pc, const Point3& query, std::size_t k) {
  if (k > pc.size()) fail(ErrorCode::KTooLarge, "k exceeds cloud size");
  const KdTree tree(pc.points);
  std::vector<std::uint32_t> out;
  for (const auto& n : tree.knn(query, k)) out.push_back(n.index);
  return out;
}

}  // namespace mmrecon
