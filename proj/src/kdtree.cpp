#include "jetfit/kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "jetfit/errors.hpp"

namespace jetfit {

KdTree3::KdTree3(const Eigen::MatrixX3d& points) : points_(&points) {
  order_.resize(static_cast<size_t>(points.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) build(0, static_cast<int>(order_.size()), 0);
}

void KdTree3::build(int lo, int hi, int depth) {
  if (hi - lo <= 1) return;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                   [this, axis](int a, int b) {
                     const double pa = (*points_)(a, axis), pb = (*points_)(b, axis);
                     return pa != pb ? pa < pb : a < b;
                   });
  build(lo, mid, depth + 1);
  build(mid + 1, hi, depth + 1);
}

void KdTree3::search(int lo, int hi, int depth, const Eigen::Vector3d& query, int k,
                     std::vector<Candidate>& heap) const {
  if (hi <= lo) return;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  const int idx = order_[static_cast<size_t>(mid)];

  const Candidate here{(points_->row(idx).transpose() - query).squaredNorm(), idx};
  if (static_cast<int>(heap.size()) < k) {
    heap.push_back(here);
    std::push_heap(heap.begin(), heap.end());
  } else if (here < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = here;
    std::push_heap(heap.begin(), heap.end());
  }

  const double axis_diff = query[axis] - (*points_)(idx, axis);
  const int near_lo = axis_diff < 0 ? lo : mid + 1;
  const int near_hi = axis_diff < 0 ? mid : hi;
  const int far_lo = axis_diff < 0 ? mid + 1 : lo;
  const int far_hi = axis_diff < 0 ? hi : mid;

  search(near_lo, near_hi, depth + 1, query, k, heap);
  // Non-strict comparison keeps equal-distance candidates reachable so index
  // tie-breaking stays exact.
  if (static_cast<int>(heap.size()) < k || axis_diff * axis_diff <= heap.front().dist2)
    search(far_lo, far_hi, depth + 1, query, k, heap);
}

std::vector<int> KdTree3::knn(const Eigen::Vector3d& query, int k) const {
  const int n = static_cast<int>(order_.size());
  if (k < 1 || k > n)
    throw InvalidInput("knn: k must be in [1, " + std::to_string(n) + "], got " +
                       std::to_string(k));
  std::vector<Candidate> heap;
  heap.reserve(static_cast<size_t>(k));
  search(0, n, 0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  std::vector<int> result(heap.size());
  for (size_t i = 0; i < heap.size(); ++i) result[i] = heap[i].index;
  return result;
}

}  // namespace jetfit
