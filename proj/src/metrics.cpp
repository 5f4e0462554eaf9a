#include "jetfit/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace jetfit {

double angle_error_unoriented_deg(const Eigen::Vector3d& n_est,
                                  const Eigen::Vector3d& n_gt) {
  const double c = std::clamp(std::abs(n_est.dot(n_gt)), 0.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw InvalidInput("rmse: empty error list");
  double acc = 0.0;
  for (const double e : errors) acc += e * e;
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

std::vector<double> pgp(std::span<const double> errors,
                        std::span<const double> alpha_grid) {
  if (errors.empty()) throw InvalidInput("pgp: empty error list");
  std::vector<double> curve;
  curve.reserve(alpha_grid.size());
  for (const double alpha : alpha_grid) {
    int good = 0;
    for (const double e : errors)
      if (e < alpha) ++good;
    curve.push_back(static_cast<double>(good) / static_cast<double>(errors.size()));
  }
  return curve;
}

double curvature_error(double k_est, double k_gt) {
  return std::abs((k_est - k_gt) / std::max(std::abs(k_gt), 1.0));
}

Eigen::Vector3d baseline_pca_normal(const Patch& patch) {
  const Eigen::RowVector3d centroid = patch.local_points.colwise().mean();
  const Eigen::MatrixX3d centered = patch.local_points.rowwise() - centroid;
  const Eigen::Matrix3d cov =
      centered.transpose() * centered / static_cast<double>(patch.local_points.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success)
    throw DegeneratePatch("baseline_pca_normal: eigendecomposition failed");
  Eigen::Vector3d n = es.eigenvectors().col(0);  // ascending eigenvalues
  if (n[2] < 0.0) n = -n;
  return n;
}

}  // namespace jetfit
