#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "jetfit/jet.hpp"
#include "jetfit/tape.hpp"
#include "jetfit/weightnet.hpp"

namespace jetfit {

struct LossWeights {
  double alpha1 = 1.0;  // consistency term
  double alpha2 = 0.1;  // transform regularizer
};

/// Magnitude of the cross product of two unit normals; sign-invariant.
double sin_loss(const Vec3& n_est, const Vec3& n_gt);

/// Mean over neighbors of (-log w_j + w_j * |n_gt x N_j|). The log barrier
/// keeps weights away from zero; `log_term = false` removes it (ablation).
double consistency_loss(const Eigen::VectorXd& weights,
                        const std::vector<Vec3>& neighbor_normals, const Vec3& n_gt,
                        bool log_term = true);

/// Sum over transforms of the entrywise absolute sum of (I - A A^T).
double reg_loss(std::span<const Eigen::MatrixXd> transforms);

// ---- tape builders ----

/// 3 x n selection matrix P with P * beta = (-beta_x, -beta_y, 0).
Eigen::MatrixXd gradient_selector(JetOrder order);

/// k x n matrices evaluating (df/dx, df/dy) at each 2D point: Gx * beta and
/// Gy * beta give the analytic jet partials.
void gradient_evaluators(const Eigen::Ref<const Eigen::MatrixX2d>& points2d,
                         JetOrder order, Eigen::MatrixXd* gx, Eigen::MatrixXd* gy);

ad::Var sin_loss_node(ad::Tape& tape, ad::Var normal_row, const Vec3& n_gt);
ad::Var consistency_loss_node(ad::Tape& tape, ad::Var weights, ad::Var neighbor_rows,
                              const Vec3& n_gt, bool log_term);
ad::Var reg_loss_node(ad::Tape& tape, std::span<const ad::Var> transforms);

/// Handles into the full per-sample graph: encoder -> weighted solve -> losses.
struct SampleLossGraph {
  ad::Var total;
  ad::Var sin_term;
  ad::Var consistency_term;
  ad::Var reg_term;
  ad::Var coeffs;          // fitted jet coefficients, n x 1
  ad::Var normal_row;      // estimated unit normal, 1 x 3 (local frame)
  NetForward net;
  ad::WlsNodeInfo wls_info;
};

/// Builds the end-to-end differentiable pipeline for one neighborhood in its
/// local frame. `gt_normal_local` is the ground-truth normal rotated into the
/// patch basis.
SampleLossGraph build_sample_loss(ad::Tape& tape, const WeightNetParams& params,
                                  const Eigen::MatrixX3d& local_points,
                                  const Vec3& gt_normal_local, JetOrder order,
                                  double ridge, const LossWeights& loss_weights,
                                  bool consistency_log_term, NetMode mode);

}  // namespace jetfit
