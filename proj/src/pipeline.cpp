#include "jetfit/pipeline.hpp"

namespace jetfit {

FitResult fit_point(const NeighborIndex& index, int query_index, const FitConfig& config,
                    const WeightNetParams* net) {
  if (!config.uniform_weights && net == nullptr)
    throw InvalidInput("fit_point: weighted mode requires network parameters");

  FitResult result;
  result.neighbors = index.knn(query_index, config.k_neighbors);
  const Patch patch = normalize_patch(index.cloud(), result.neighbors, query_index);
  result.patch_scale = patch.scale;

  if (config.uniform_weights) {
    result.weights = Eigen::VectorXd::Ones(patch.local_points.rows());
  } else {
    result.weights = forward(*net, patch).weights;
  }

  const JetOrder order(config.jet_order);
  const Eigen::MatrixX2d pts2d = patch.local_points.leftCols<2>();
  const auto design = build_vandermonde(pts2d, order);
  const auto precond = make_preconditioner(pts2d, order);
  result.precond_h = precond.h;
  SolveDiagnostics diag;
  const JetCoefficients jet = solve_wls(design, result.weights, patch.local_points.col(2),
                                        precond, config.ridge, &diag);
  result.ridge_used = diag.ridge_used;

  result.normal = denormalize_normal(patch, jet_normal(jet));
  if (order.degree() >= 2) {
    const CurvaturePair curv = principal_curvatures(jet);
    result.k1 = denormalize_curvature(patch, curv.k1);
    result.k2 = denormalize_curvature(patch, curv.k2);
    result.dir1 = denormalize_direction(patch, curv.dir1);
    result.dir2 = denormalize_direction(patch, curv.dir2);
  }
  return result;
}

}  // namespace jetfit
