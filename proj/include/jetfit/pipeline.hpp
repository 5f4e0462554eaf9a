#pragma once

#include <optional>

#include "jetfit/jet.hpp"
#include "jetfit/neighborhood.hpp"
#include "jetfit/weightnet.hpp"

namespace jetfit {

struct FitConfig {
  int k_neighbors = 256;
  int jet_order = 3;
  double ridge = 1e-8;
  bool uniform_weights = false;
};

struct FitResult {
  Eigen::Vector3d normal;          // world frame, unoriented
  double k1 = 0.0;                 // |k1| >= |k2|, world units
  double k2 = 0.0;
  Eigen::Vector3d dir1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d dir2 = Eigen::Vector3d::Zero();
  Eigen::VectorXd weights;         // per neighbor, aligned with `neighbors`
  std::vector<int> neighbors;
  double ridge_used = 0.0;
  double patch_scale = 0.0;
  double precond_h = 0.0;
};

/// Full estimation pipeline for one query point: neighborhood extraction,
/// normalization, weight prediction (or uniform weights), weighted fit, and
/// inverse transforms. `net` may be null only with uniform weights.
FitResult fit_point(const NeighborIndex& index, int query_index, const FitConfig& config,
                    const WeightNetParams* net);

}  // namespace jetfit
