#pragma once

#include <cstdint>
#include <vector>

#include "jetfit/pointcloud.hpp"

namespace jetfit {

/// Perturbs positions with i.i.d. Gaussian noise of standard deviation
/// sigma_frac_bbox times the bounding-box diagonal. Ground truth is untouched.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma_frac_bbox,
                              uint64_t seed);

enum class DensityKind { kGradient, kStripes };

struct DensityParams {
  // gradient: keep probability interpolates linearly along the longest axis.
  double keep_min = 0.3;
  double keep_max = 1.0;
  // stripes: periodic bands along the axis are removed entirely.
  int bands = 8;
  double removed_fraction = 0.3;
  int axis = -1;  // -1 selects the longest bounding-box axis
};

/// Subsamples the cloud, keeping ground truth row-aligned. `kept` (optional)
/// receives the original index of every surviving point.
PointCloud subsample_density(const PointCloud& cloud, DensityKind kind,
                             const DensityParams& params, uint64_t seed,
                             std::vector<int>* kept = nullptr);

/// Row-subset of a cloud preserving ground-truth alignment and remapping
/// evaluation indices.
PointCloud select_points(const PointCloud& cloud, const std::vector<int>& indices);

}  // namespace jetfit
