#pragma once

#include <span>
#include <vector>

#include "jetfit/neighborhood.hpp"

namespace jetfit {

/// Angle between the lines spanned by two unit normals, in degrees.
double angle_error_unoriented_deg(const Eigen::Vector3d& n_est,
                                  const Eigen::Vector3d& n_gt);

double rmse(std::span<const double> errors);

/// Fraction of errors strictly below each threshold of the grid.
std::vector<double> pgp(std::span<const double> errors,
                        std::span<const double> alpha_grid);

inline std::vector<double> default_pgp_grid() {
  std::vector<double> grid(31);
  for (int i = 0; i <= 30; ++i) grid[static_cast<size_t>(i)] = static_cast<double>(i);
  return grid;
}

/// Normalized curvature deviation |k_est - k_gt| / max(|k_gt|, 1).
double curvature_error(double k_est, double k_gt);

/// Smallest-variance direction of the neighborhood covariance about its
/// centroid, in the patch frame.
Eigen::Vector3d baseline_pca_normal(const Patch& patch);

}  // namespace jetfit
