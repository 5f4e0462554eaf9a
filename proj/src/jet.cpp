#include "jetfit/jet.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace jetfit {

std::vector<Monomial> monomial_basis(JetOrder order) {
  std::vector<Monomial> cols;
  cols.reserve(order.coeff_count());
  for (int total = 0; total <= order.degree(); ++total)
    for (int yexp = 0; yexp <= total; ++yexp)
      cols.push_back({total - yexp, yexp});
  return cols;
}

DesignMatrix build_vandermonde(const Eigen::Ref<const Eigen::MatrixX2d>& points2d,
                               JetOrder order) {
  const auto n_pts = points2d.rows();
  if (n_pts == 0) throw InvalidInput("build_vandermonde: empty point set");
  if (!points2d.allFinite())
    throw InvalidInput("build_vandermonde: non-finite coordinate in input");

  DesignMatrix design{Eigen::MatrixXd(n_pts, order.coeff_count()), monomial_basis(order),
                      order};
  const int degree = order.degree();
  Eigen::VectorXd xpow(degree + 1), ypow(degree + 1);
  for (Eigen::Index i = 0; i < n_pts; ++i) {
    xpow[0] = 1.0;
    ypow[0] = 1.0;
    for (int p = 1; p <= degree; ++p) {
      xpow[p] = xpow[p - 1] * points2d(i, 0);
      ypow[p] = ypow[p - 1] * points2d(i, 1);
    }
    for (size_t j = 0; j < design.columns.size(); ++j)
      design.values(i, j) = xpow[design.columns[j].x_exp] * ypow[design.columns[j].y_exp];
  }
  return design;
}

Preconditioner make_preconditioner(const Eigen::Ref<const Eigen::MatrixX2d>& points2d,
                                   JetOrder order) {
  if (points2d.rows() == 0) throw InvalidInput("make_preconditioner: empty point set");
  if (!points2d.allFinite())
    throw InvalidInput("make_preconditioner: non-finite coordinate in input");
  const double h = points2d.rowwise().norm().mean();
  if (!(h > 0.0))
    throw DegeneratePatch("make_preconditioner: all points at the origin (h = 0)");

  Preconditioner precond;
  precond.h = h;
  const auto cols = monomial_basis(order);
  precond.diag.resize(static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j)
    precond.diag[static_cast<Eigen::Index>(j)] = std::pow(h, cols[j].total());
  return precond;
}

namespace {

double condition_estimate(const Eigen::MatrixXd& normal_matrix) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal_matrix,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0)) return std::numeric_limits<double>::infinity();
  return lmax / lmin;
}

}  // namespace

WlsSolution solve_wls_detailed(const Eigen::MatrixXd& design_values,
                               const Eigen::VectorXd& weights,
                               const Eigen::VectorXd& heights,
                               const Eigen::VectorXd& precond_diag, double ridge) {
  const Eigen::Index n_pts = design_values.rows();
  const Eigen::Index n_coef = design_values.cols();
  if (weights.size() != n_pts || heights.size() != n_pts)
    throw InvalidInput("solve_wls: row count mismatch between design, weights, heights");
  if (precond_diag.size() != n_coef)
    throw InvalidInput("solve_wls: preconditioner size does not match design columns");
  if (ridge < 0.0) throw InvalidInput("solve_wls: ridge must be non-negative");
  if ((weights.array() <= 0.0).any())
    throw InvalidInput("solve_wls: weights must be strictly positive");

  WlsSolution sol;
  // Preconditioned system M' (D beta) = B with M' = M D^-1.
  sol.scaled_design = design_values * precond_diag.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd normal_matrix =
      sol.scaled_design.transpose() * weights.asDiagonal() * sol.scaled_design;
  const Eigen::VectorXd rhs =
      sol.scaled_design.transpose() * weights.cwiseProduct(heights);

  constexpr double kMaxRidge = 1e-2;
  constexpr double kFirstEscalation = 1e-8;
  sol.ridge_used = ridge;
  Eigen::MatrixXd regularized;
  while (true) {
    regularized = normal_matrix;
    regularized.diagonal().array() += sol.ridge_used;
    sol.llt.compute(regularized);
    if (sol.llt.info() == Eigen::Success) break;
    if (sol.ridge_used >= kMaxRidge)
      throw SingularFit("solve_wls: normal matrix not factorizable at ridge " +
                            std::to_string(sol.ridge_used),
                        condition_estimate(regularized));
    sol.ridge_used = (sol.ridge_used == 0.0)
                         ? kFirstEscalation
                         : std::min(sol.ridge_used * 10.0, kMaxRidge);
    ++sol.escalations;
  }

  sol.scaled_beta = sol.llt.solve(rhs);
  sol.beta = sol.scaled_beta.cwiseQuotient(precond_diag);
  if (!sol.beta.allFinite())
    throw SingularFit("solve_wls: non-finite solution", condition_estimate(regularized));
  return sol;
}

JetCoefficients solve_wls(const DesignMatrix& design, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& heights, const Preconditioner& precond,
                          double ridge, SolveDiagnostics* diag) {
  WlsSolution sol =
      solve_wls_detailed(design.values, weights, heights, precond.diag, ridge);
  if (diag != nullptr) {
    diag->ridge_used = sol.ridge_used;
    diag->escalations = sol.escalations;
  }
  return JetCoefficients{std::move(sol.beta), design.order};
}

JetCoefficients solve_ls(const DesignMatrix& design, const Eigen::VectorXd& heights,
                         const Preconditioner& precond, double ridge,
                         SolveDiagnostics* diag) {
  return solve_wls(design, Eigen::VectorXd::Ones(design.values.rows()), heights, precond,
                   ridge, diag);
}

Vec3 normal_from_height_gradient(double gx, double gy) {
  Vec3 v(-gx, -gy, 1.0);
  return v / v.norm();
}

Vec3 jet_normal(const JetCoefficients& jet) {
  if (!jet.beta.allFinite()) throw InvalidInput("jet_normal: non-finite coefficients");
  return normal_from_height_gradient(jet.beta[1], jet.beta[2]);
}

Eigen::Matrix2d weingarten(const JetCoefficients& jet) {
  if (jet.order.degree() < 2)
    throw UnsupportedOrder("weingarten: requires jet order >= 2");
  const double bx = jet.beta[1], by = jet.beta[2];
  const double bxx = jet.beta[3], bxy = jet.beta[4], byy = jet.beta[5];

  Eigen::Matrix2d first_form;
  first_form << 1.0 + bx * bx, bx * by, bx * by, 1.0 + by * by;
  Eigen::Matrix2d second_form;
  second_form << 2.0 * bxx, bxy, bxy, 2.0 * byy;

  const double scale = -1.0 / std::sqrt(bx * bx + by * by + 1.0);
  return scale * first_form.inverse() * second_form;
}

CurvaturePair principal_curvatures(const JetCoefficients& jet) {
  const Eigen::Matrix2d shape_op = weingarten(jet);

  // Real eigenvalues: the shape operator is self-adjoint in the metric of the
  // fitting frame, so the discriminant is non-negative up to roundoff.
  const double tr = shape_op.trace();
  const double det = shape_op.determinant();
  const double disc = std::max(0.0, tr * tr - 4.0 * det);
  const double sq = std::sqrt(disc);
  double lam_a = 0.5 * (tr + sq);
  double lam_b = 0.5 * (tr - sq);
  if (std::abs(lam_b) > std::abs(lam_a)) std::swap(lam_a, lam_b);

  auto param_eigenvector = [&shape_op](double lam) -> Eigen::Vector2d {
    // Rows of (S - lam I) are orthogonal to the eigenvector; take the larger.
    const Eigen::Vector2d row0(shape_op(0, 0) - lam, shape_op(0, 1));
    const Eigen::Vector2d row1(shape_op(1, 0), shape_op(1, 1) - lam);
    const Eigen::Vector2d cand0(shape_op(0, 1), lam - shape_op(0, 0));
    const Eigen::Vector2d cand1(lam - shape_op(1, 1), shape_op(1, 0));
    Eigen::Vector2d v = (row0.norm() >= row1.norm()) ? cand0 : cand1;
    if (v.norm() < 1e-14) v = Eigen::Vector2d(1.0, 0.0);  // umbilic
    return v.normalized();
  };

  const double bx = jet.beta[1], by = jet.beta[2];
  auto lift = [bx, by](const Eigen::Vector2d& v) {
    return Vec3(v[0], v[1], v[0] * bx + v[1] * by);
  };

  CurvaturePair out;
  out.k1 = lam_a;
  out.k2 = lam_b;
  out.dir1 = lift(param_eigenvector(lam_a)).normalized();
  Vec3 second = lift(param_eigenvector(lam_b));
  second -= second.dot(out.dir1) * out.dir1;
  if (second.norm() < 1e-10) {
    // Repeated eigenvalue or numerically parallel directions.
    second = jet_normal(jet).cross(out.dir1);
  }
  out.dir2 = second.normalized();
  return out;
}

Eigen::Vector2d jet_gradient(const JetCoefficients& jet, double x, double y) {
  const auto cols = monomial_basis(jet.order);
  const int degree = jet.order.degree();
  Eigen::VectorXd xpow(degree + 1), ypow(degree + 1);
  xpow[0] = 1.0;
  ypow[0] = 1.0;
  for (int p = 1; p <= degree; ++p) {
    xpow[p] = xpow[p - 1] * x;
    ypow[p] = ypow[p - 1] * y;
  }
  double gx = 0.0, gy = 0.0;
  for (size_t j = 0; j < cols.size(); ++j) {
    const auto [a, b] = cols[j];
    const double coef = jet.beta[static_cast<Eigen::Index>(j)];
    if (a >= 1) gx += coef * a * xpow[a - 1] * ypow[b];
    if (b >= 1) gy += coef * b * xpow[a] * ypow[b - 1];
  }
  return {gx, gy};
}

std::vector<Vec3> neighbor_normals(const JetCoefficients& jet,
                                   const Eigen::Ref<const Eigen::MatrixX2d>& points2d) {
  std::vector<Vec3> normals;
  normals.reserve(static_cast<size_t>(points2d.rows()));
  for (Eigen::Index i = 0; i < points2d.rows(); ++i) {
    const Eigen::Vector2d g = jet_gradient(jet, points2d(i, 0), points2d(i, 1));
    normals.push_back(normal_from_height_gradient(g[0], g[1]));
  }
  return normals;
}

double evaluate_jet(const JetCoefficients& jet, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y))
    throw InvalidInput("evaluate_jet: non-finite evaluation point");
  const auto cols = monomial_basis(jet.order);
  const int degree = jet.order.degree();
  Eigen::VectorXd xpow(degree + 1), ypow(degree + 1);
  xpow[0] = 1.0;
  ypow[0] = 1.0;
  for (int p = 1; p <= degree; ++p) {
    xpow[p] = xpow[p - 1] * x;
    ypow[p] = ypow[p - 1] * y;
  }
  double z = 0.0;
  for (size_t j = 0; j < cols.size(); ++j)
    z += jet.beta[static_cast<Eigen::Index>(j)] * xpow[cols[j].x_exp] * ypow[cols[j].y_exp];
  return z;
}

}  // namespace jetfit
