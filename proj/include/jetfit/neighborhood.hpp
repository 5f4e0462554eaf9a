#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "jetfit/kdtree.hpp"
#include "jetfit/pointcloud.hpp"

namespace jetfit {

/// A k-neighborhood in normalized local coordinates: translated so the query
/// is at the origin, scaled so the farthest neighbor sits on the unit sphere,
/// and rotated into the PCA fitting basis (smallest-variance axis last).
struct Patch {
  Eigen::MatrixX3d local_points;   // k x 3, dimensionless
  int query_index = -1;
  double scale = 1.0;              // world length of the unit sphere radius
  Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();  // world = basis * local
  Eigen::Vector3d query_world = Eigen::Vector3d::Zero();
};

/// Exact k-NN with a kd-tree; clouds under 1000 points use an exhaustive scan.
class NeighborIndex {
 public:
  explicit NeighborIndex(const PointCloud& cloud);
  std::vector<int> knn(int query_index, int k) const;
  const PointCloud& cloud() const { return *cloud_; }

 private:
  const PointCloud* cloud_;
  std::unique_ptr<KdTree3> tree_;  // null for small clouds
};

/// Convenience single-shot query (builds a throwaway index).
std::vector<int> knn(const PointCloud& cloud, int query_index, int k);

/// Runs the preprocessing pipeline on the given neighborhood. An optional
/// orientation hint makes the basis third axis agree with it in sign.
Patch normalize_patch(const PointCloud& cloud, std::span<const int> neighbor_indices,
                      int query_index, const Eigen::Vector3d* orient_hint = nullptr);

/// Maps a unit normal from the patch frame back to the world frame.
Eigen::Vector3d denormalize_normal(const Patch& patch, const Eigen::Vector3d& local_normal);

/// Maps a curvature from patch units back to world units (1/length).
double denormalize_curvature(const Patch& patch, double curvature);

/// Maps a tangent direction from the patch frame back to the world frame.
Eigen::Vector3d denormalize_direction(const Patch& patch, const Eigen::Vector3d& local_dir);

}  // namespace jetfit
