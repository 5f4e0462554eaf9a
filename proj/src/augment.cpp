#include "jetfit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace jetfit {

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma_frac_bbox,
                              uint64_t seed) {
  if (sigma_frac_bbox < 0.0)
    throw InvalidInput("add_gaussian_noise: sigma must be non-negative");
  PointCloud noisy = cloud;
  if (sigma_frac_bbox == 0.0) return noisy;
  const double sigma = sigma_frac_bbox * cloud.bbox_diagonal();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < noisy.positions.rows(); ++i)
    for (Eigen::Index j = 0; j < 3; ++j) noisy.positions(i, j) += gauss(gen);
  return noisy;
}

PointCloud select_points(const PointCloud& cloud, const std::vector<int>& indices) {
  PointCloud out;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.positions.resize(n, 3);
  if (cloud.gt_normals) out.gt_normals.emplace(n, 3);
  if (cloud.gt_curvatures) out.gt_curvatures.emplace(n, 2);
  std::vector<int> remap(static_cast<size_t>(cloud.size()), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int src = indices[static_cast<size_t>(i)];
    if (src < 0 || src >= cloud.size())
      throw InvalidInput("select_points: index out of range");
    out.positions.row(i) = cloud.positions.row(src);
    if (cloud.gt_normals) out.gt_normals->row(i) = cloud.gt_normals->row(src);
    if (cloud.gt_curvatures) out.gt_curvatures->row(i) = cloud.gt_curvatures->row(src);
    remap[static_cast<size_t>(src)] = static_cast<int>(i);
  }
  if (cloud.eval_indices) {
    out.eval_indices.emplace();
    for (int idx : *cloud.eval_indices)
      if (remap[static_cast<size_t>(idx)] >= 0)
        out.eval_indices->push_back(remap[static_cast<size_t>(idx)]);
  }
  return out;
}

PointCloud subsample_density(const PointCloud& cloud, DensityKind kind,
                             const DensityParams& params, uint64_t seed,
                             std::vector<int>* kept_out) {
  int axis = params.axis;
  Eigen::RowVector3d lo = cloud.positions.colwise().minCoeff();
  Eigen::RowVector3d hi = cloud.positions.colwise().maxCoeff();
  if (axis < 0) {
    (hi - lo).maxCoeff(&axis);
  } else if (axis > 2) {
    throw InvalidInput("subsample_density: axis must be 0, 1 or 2");
  }
  const double span = hi[axis] - lo[axis];

  std::vector<int> kept;
  switch (kind) {
    case DensityKind::kGradient: {
      if (!(params.keep_min > 0.0) || params.keep_min > 1.0 || !(params.keep_max > 0.0) ||
          params.keep_max > 1.0)
        throw InvalidInput("subsample_density: keep fractions must be in (0, 1]");
      std::mt19937_64 gen(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int i = 0; i < cloud.size(); ++i) {
        const double t = span > 0.0 ? (cloud.positions(i, axis) - lo[axis]) / span : 0.0;
        const double keep_prob = params.keep_min + (params.keep_max - params.keep_min) * t;
        if (unit(gen) < keep_prob) kept.push_back(i);
      }
      break;
    }
    case DensityKind::kStripes: {
      if (params.bands < 1) throw InvalidInput("subsample_density: bands must be >= 1");
      if (params.removed_fraction < 0.0 || params.removed_fraction > 1.0)
        throw InvalidInput("subsample_density: removed_fraction must be in [0, 1]");
      const double period = span > 0.0 ? span / params.bands : 1.0;
      const double band = params.removed_fraction * period;
      for (int i = 0; i < cloud.size(); ++i) {
        const double offset = std::fmod(cloud.positions(i, axis) - lo[axis], period);
        if (offset >= band) kept.push_back(i);
      }
      break;
    }
  }
  if (kept.empty())
    throw InvalidInput("subsample_density: no points survive the sampling regime");
  if (kept_out != nullptr) *kept_out = kept;
  return select_points(cloud, kept);
}

}  // namespace jetfit
