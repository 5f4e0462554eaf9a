#include "jetfit/losses.hpp"

#include <cmath>

namespace jetfit {

namespace {

Eigen::Matrix3d cross_matrix(const Vec3& a) {
  Eigen::Matrix3d c;
  c << 0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0;
  return c;
}

}  // namespace

double sin_loss(const Vec3& n_est, const Vec3& n_gt) {
  return n_gt.cross(n_est).norm();
}

double consistency_loss(const Eigen::VectorXd& weights,
                        const std::vector<Vec3>& neighbor_normals, const Vec3& n_gt,
                        bool log_term) {
  const Eigen::Index k = weights.size();
  if (k == 0) throw InvalidInput("consistency_loss: empty weight vector");
  if (static_cast<Eigen::Index>(neighbor_normals.size()) != k)
    throw InvalidInput("consistency_loss: weights and normals disagree in length");
  if ((weights.array() <= 0.0).any())
    throw InvalidInput("consistency_loss: weights must be strictly positive");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (log_term) acc -= std::log(weights[j]);
    acc += weights[j] * n_gt.cross(neighbor_normals[static_cast<size_t>(j)]).norm();
  }
  return acc / static_cast<double>(k);
}

double reg_loss(std::span<const Eigen::MatrixXd> transforms) {
  double acc = 0.0;
  for (const Eigen::MatrixXd& a : transforms) {
    if (a.rows() != a.cols()) throw InvalidInput("reg_loss: transform must be square");
    const Eigen::MatrixXd residual =
        Eigen::MatrixXd::Identity(a.rows(), a.rows()) - a * a.transpose();
    acc += residual.cwiseAbs().sum();
  }
  return acc;
}

Eigen::MatrixXd gradient_selector(JetOrder order) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, order.coeff_count());
  p(0, 1) = -1.0;  // x coefficient
  p(1, 2) = -1.0;  // y coefficient
  return p;
}

void gradient_evaluators(const Eigen::Ref<const Eigen::MatrixX2d>& points2d,
                         JetOrder order, Eigen::MatrixXd* gx, Eigen::MatrixXd* gy) {
  const auto cols = monomial_basis(order);
  const Eigen::Index k = points2d.rows();
  gx->setZero(k, order.coeff_count());
  gy->setZero(k, order.coeff_count());
  const int degree = order.degree();
  Eigen::VectorXd xpow(degree + 1), ypow(degree + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    xpow[0] = 1.0;
    ypow[0] = 1.0;
    for (int p = 1; p <= degree; ++p) {
      xpow[p] = xpow[p - 1] * points2d(i, 0);
      ypow[p] = ypow[p - 1] * points2d(i, 1);
    }
    for (size_t j = 0; j < cols.size(); ++j) {
      const auto [a, b] = cols[j];
      const auto jc = static_cast<Eigen::Index>(j);
      if (a >= 1) (*gx)(i, jc) = a * xpow[a - 1] * ypow[b];
      if (b >= 1) (*gy)(i, jc) = b * xpow[a] * ypow[b - 1];
    }
  }
}

ad::Var sin_loss_node(ad::Tape& tape, ad::Var normal_row, const Vec3& n_gt) {
  // Rows of X * C^T are (n_gt x row)^T.
  ad::Var crossed =
      tape.matmul(normal_row, tape.constant(cross_matrix(n_gt).transpose()));
  return tape.rowwise_norm(crossed);
}

ad::Var consistency_loss_node(ad::Tape& tape, ad::Var weights, ad::Var neighbor_rows,
                              const Vec3& n_gt, bool log_term) {
  const auto k = static_cast<double>(tape.val(weights).rows());
  ad::Var crossed =
      tape.matmul(neighbor_rows, tape.constant(cross_matrix(n_gt).transpose()));
  ad::Var sines = tape.rowwise_norm(crossed);
  ad::Var weighted = tape.sum(tape.cwise_mul(weights, sines));
  if (!log_term) return tape.scale(weighted, 1.0 / k);
  ad::Var barrier = tape.scale(tape.sum(tape.log_elem(weights)), -1.0);
  return tape.scale(tape.add(barrier, weighted), 1.0 / k);
}

ad::Var reg_loss_node(ad::Tape& tape, std::span<const ad::Var> transforms) {
  ad::Var acc = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  for (const ad::Var a : transforms) {
    const Eigen::Index dim = tape.val(a).rows();
    ad::Var residual = tape.sub(tape.constant(Eigen::MatrixXd::Identity(dim, dim)),
                                tape.matmul(a, tape.transpose(a)));
    acc = tape.add(acc, tape.sum(tape.abs_elem(residual)));
  }
  return acc;
}

SampleLossGraph build_sample_loss(ad::Tape& tape, const WeightNetParams& params,
                                  const Eigen::MatrixX3d& local_points,
                                  const Vec3& gt_normal_local, JetOrder order,
                                  double ridge, const LossWeights& loss_weights,
                                  bool consistency_log_term, NetMode mode) {
  SampleLossGraph g;
  g.net = weightnet_forward(tape, params, local_points, mode);

  const Eigen::MatrixX2d pts2d = local_points.leftCols<2>();
  const auto design = build_vandermonde(pts2d, order);
  const auto precond = make_preconditioner(pts2d, order);
  g.coeffs = tape.wls_solve(g.net.weights, design.values, local_points.col(2),
                            precond.diag, ridge, &g.wls_info);

  // Estimated normal at the query (the origin of the local frame).
  ad::Var grad3 = tape.add(tape.matmul(tape.constant(gradient_selector(order)), g.coeffs),
                           tape.constant(Eigen::Vector3d(0, 0, 1)));
  g.normal_row = tape.rows_normalize(tape.transpose(grad3));
  g.sin_term = sin_loss_node(tape, g.normal_row, gt_normal_local);

  // Neighbor normals from the analytic jet gradient at every sample point.
  Eigen::MatrixXd gx, gy;
  gradient_evaluators(pts2d, order, &gx, &gy);
  const Eigen::Index k = local_points.rows();
  ad::Var vx = tape.scale(tape.matmul(tape.constant(gx), g.coeffs), -1.0);
  ad::Var vy = tape.scale(tape.matmul(tape.constant(gy), g.coeffs), -1.0);
  ad::Var ones = tape.constant(Eigen::MatrixXd::Ones(k, 1));
  ad::Var neighbor_rows = tape.rows_normalize(tape.hconcat(tape.hconcat(vx, vy), ones));
  g.consistency_term = consistency_loss_node(tape, g.net.weights, neighbor_rows,
                                             gt_normal_local, consistency_log_term);

  const std::array<ad::Var, 2> transforms{g.net.transform1, g.net.transform2};
  g.reg_term = reg_loss_node(tape, transforms);

  g.total = tape.add(g.sin_term, tape.add(tape.scale(g.consistency_term, loss_weights.alpha1),
                                          tape.scale(g.reg_term, loss_weights.alpha2)));
  return g;
}

}  // namespace jetfit
