#include "jetfit/neighborhood.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace jetfit {

namespace {
constexpr int kExhaustiveLimit = 1000;
}

NeighborIndex::NeighborIndex(const PointCloud& cloud) : cloud_(&cloud) {
  cloud.validate();
  if (cloud.size() >= kExhaustiveLimit)
    tree_ = std::make_unique<KdTree3>(cloud.positions);
}

std::vector<int> NeighborIndex::knn(int query_index, int k) const {
  const int n = cloud_->size();
  if (query_index < 0 || query_index >= n)
    throw InvalidInput("knn: query index out of range");
  if (k < 1 || k > n)
    throw InvalidInput("knn: k must be in [1, " + std::to_string(n) + "], got " +
                       std::to_string(k));
  const Eigen::Vector3d query = cloud_->positions.row(query_index).transpose();
  if (tree_) return tree_->knn(query, k);

  std::vector<std::pair<double, int>> dist(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    dist[static_cast<size_t>(i)] = {
        (cloud_->positions.row(i).transpose() - query).squaredNorm(), i};
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<int> result(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) result[static_cast<size_t>(i)] = dist[static_cast<size_t>(i)].second;
  return result;
}

std::vector<int> knn(const PointCloud& cloud, int query_index, int k) {
  return NeighborIndex(cloud).knn(query_index, k);
}

Patch normalize_patch(const PointCloud& cloud, std::span<const int> neighbor_indices,
                      int query_index, const Eigen::Vector3d* orient_hint) {
  if (neighbor_indices.size() < 3)
    throw InvalidInput("normalize_patch: need at least 3 neighbors");
  if (query_index < 0 || query_index >= cloud.size())
    throw InvalidInput("normalize_patch: query index out of range");

  const Eigen::Vector3d query = cloud.positions.row(query_index).transpose();
  const int k = static_cast<int>(neighbor_indices.size());
  Eigen::MatrixX3d centered(k, 3);
  for (int i = 0; i < k; ++i) {
    const int idx = neighbor_indices[static_cast<size_t>(i)];
    if (idx < 0 || idx >= cloud.size())
      throw InvalidInput("normalize_patch: neighbor index out of range");
    centered.row(i) = cloud.positions.row(idx) - query.transpose();
  }

  const double scale = centered.rowwise().norm().maxCoeff();
  if (!(scale > 0.0))
    throw DegeneratePatch("normalize_patch: all neighbors coincide with the query");
  centered /= scale;

  // Fitting basis from the covariance about the neighborhood centroid.
  const Eigen::RowVector3d centroid = centered.colwise().mean();
  const Eigen::MatrixX3d demeaned = centered.rowwise() - centroid;
  const Eigen::Matrix3d cov = demeaned.transpose() * demeaned / static_cast<double>(k);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success)
    throw DegeneratePatch("normalize_patch: covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues; reorder to descending variance so the
  // smallest-variance direction is the last basis vector.
  Eigen::Matrix3d basis;
  basis.col(0) = es.eigenvectors().col(2);
  basis.col(1) = es.eigenvectors().col(1);
  basis.col(2) = es.eigenvectors().col(0);
  const Eigen::Vector3d eigvals(es.eigenvalues()[2], es.eigenvalues()[1],
                                es.eigenvalues()[0]);
  if (eigvals[1] <= 1e-12 * std::max(eigvals[0], 1e-300))
    throw DegeneratePatch("normalize_patch: neighborhood is collinear");

  if (orient_hint != nullptr && basis.col(2).dot(*orient_hint) < 0.0)
    basis.col(2) = -basis.col(2);
  if (basis.determinant() < 0.0) basis.col(1) = -basis.col(1);

  Patch patch;
  patch.local_points = centered * basis;  // rows are basis^T * p
  patch.query_index = query_index;
  patch.scale = scale;
  patch.basis = basis;
  patch.query_world = query;
  return patch;
}

Eigen::Vector3d denormalize_normal(const Patch& patch, const Eigen::Vector3d& local_normal) {
  return patch.basis * local_normal;
}

double denormalize_curvature(const Patch& patch, double curvature) {
  if (!std::isfinite(curvature))
    throw InvalidInput("denormalize_curvature: non-finite curvature");
  return curvature / patch.scale;
}

Eigen::Vector3d denormalize_direction(const Patch& patch, const Eigen::Vector3d& local_dir) {
  return patch.basis * local_dir;
}

}  // namespace jetfit
