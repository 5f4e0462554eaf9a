#pragma once

#include <Eigen/Dense>
#include <vector>

namespace jetfit {

/// Exact k-nearest-neighbor search over a fixed set of 3D points.
/// Ties in distance are broken by ascending point index.
class KdTree3 {
 public:
  /// The point matrix must outlive the tree.
  explicit KdTree3(const Eigen::MatrixX3d& points);

  /// Indices of the k nearest points to `query`, sorted by (distance, index).
  std::vector<int> knn(const Eigen::Vector3d& query, int k) const;

 private:
  struct Candidate {
    double dist2;
    int index;
    bool operator<(const Candidate& other) const {
      return dist2 != other.dist2 ? dist2 < other.dist2 : index < other.index;
    }
  };

  void build(int lo, int hi, int depth);
  void search(int lo, int hi, int depth, const Eigen::Vector3d& query, int k,
              std::vector<Candidate>& heap) const;

  const Eigen::MatrixX3d* points_;
  std::vector<int> order_;  // implicit balanced tree: median of [lo, hi) at the midpoint
};

}  // namespace jetfit
