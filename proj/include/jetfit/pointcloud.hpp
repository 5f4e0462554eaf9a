#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "jetfit/errors.hpp"

namespace jetfit {

struct PointCloud {
  Eigen::MatrixX3d positions;                       // world length units
  std::optional<Eigen::MatrixX3d> gt_normals;       // unit vectors, row-aligned
  std::optional<Eigen::MatrixX2d> gt_curvatures;    // (k1, k2) per point
  std::optional<std::vector<int>> eval_indices;

  int size() const { return static_cast<int>(positions.rows()); }

  void validate() const {
    if (positions.rows() < 1) throw InvalidInput("point cloud must contain at least one point");
    if (!positions.allFinite()) throw InvalidInput("point cloud has non-finite positions");
    if (gt_normals) {
      if (gt_normals->rows() != positions.rows())
        throw FormatError("normals row count does not match positions");
      const auto norms = gt_normals->rowwise().norm();
      if (((norms.array() - 1.0).abs() > 1e-6).any())
        throw InvalidInput("ground-truth normals must be unit length");
    }
    if (gt_curvatures && gt_curvatures->rows() != positions.rows())
      throw FormatError("curvatures row count does not match positions");
    if (eval_indices) {
      for (int idx : *eval_indices)
        if (idx < 0 || idx >= size())
          throw InvalidInput("evaluation index out of range: " + std::to_string(idx));
    }
  }

  /// Length of the axis-aligned bounding box diagonal.
  double bbox_diagonal() const {
    const Eigen::RowVector3d lo = positions.colwise().minCoeff();
    const Eigen::RowVector3d hi = positions.colwise().maxCoeff();
    return (hi - lo).norm();
  }
};

}  // namespace jetfit
