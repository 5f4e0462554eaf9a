#pragma once

#include <Eigen/Dense>
#include <vector>

#include "jetfit/errors.hpp"

namespace jetfit {

using Vec3 = Eigen::Vector3d;

/// Total degree of the truncated polynomial height function z = f(x, y).
class JetOrder {
 public:
  explicit JetOrder(int degree) : degree_(degree) {
    if (degree < 1 || degree > 4)
      throw InvalidInput("jet order must be in [1, 4], got " + std::to_string(degree));
  }
  int degree() const { return degree_; }
  int coeff_count() const { return (degree_ + 1) * (degree_ + 2) / 2; }

  friend bool operator==(JetOrder a, JetOrder b) { return a.degree_ == b.degree_; }

 private:
  int degree_;
};

struct Monomial {
  int x_exp = 0;
  int y_exp = 0;
  int total() const { return x_exp + y_exp; }
};

/// Canonical column order: ascending total degree, then ascending y exponent.
/// The first column is the constant monomial; columns 1 and 2 are x and y.
std::vector<Monomial> monomial_basis(JetOrder order);

struct DesignMatrix {
  Eigen::MatrixXd values;          // one row per sample point, one column per monomial
  std::vector<Monomial> columns;
  JetOrder order;
};

/// Column scaling for the design matrix: the column of monomial x^a y^b is
/// divided by h^(a+b), with h the mean 2D norm of the sample points.
struct Preconditioner {
  Eigen::VectorXd diag;            // h^(a+b) per column
  double h = 1.0;
};

struct JetCoefficients {
  Eigen::VectorXd beta;            // indexed like DesignMatrix columns
  JetOrder order;
};

/// Principal curvatures sorted by descending magnitude, with 3D directions in
/// the fitting frame.
struct CurvaturePair {
  double k1 = 0.0;
  double k2 = 0.0;
  Vec3 dir1 = Vec3::UnitX();
  Vec3 dir2 = Vec3::UnitY();
};

struct SolveDiagnostics {
  double ridge_used = 0.0;
  int escalations = 0;
};

/// Full state of a weighted solve, kept around when the caller needs to
/// differentiate through it or inspect conditioning.
struct WlsSolution {
  Eigen::VectorXd beta;            // unpreconditioned units
  Eigen::VectorXd scaled_beta;     // D * beta
  Eigen::MatrixXd scaled_design;   // M D^-1
  Eigen::LLT<Eigen::MatrixXd> llt; // factor of M'^T W M' + ridge I
  double ridge_used = 0.0;
  int escalations = 0;
};

WlsSolution solve_wls_detailed(const Eigen::MatrixXd& design_values,
                               const Eigen::VectorXd& weights,
                               const Eigen::VectorXd& heights,
                               const Eigen::VectorXd& precond_diag, double ridge);

DesignMatrix build_vandermonde(const Eigen::Ref<const Eigen::MatrixX2d>& points2d,
                               JetOrder order);

Preconditioner make_preconditioner(const Eigen::Ref<const Eigen::MatrixX2d>& points2d,
                                   JetOrder order);

/// Minimizes sum_i w_i (M_i beta - b_i)^2 through the preconditioned normal
/// equations with a ridge term. On factorization failure the ridge escalates
/// x10 up to 1e-2 before SingularFit is raised.
JetCoefficients solve_wls(const DesignMatrix& design, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& heights, const Preconditioner& precond,
                          double ridge, SolveDiagnostics* diag = nullptr);

JetCoefficients solve_ls(const DesignMatrix& design, const Eigen::VectorXd& heights,
                         const Preconditioner& precond, double ridge,
                         SolveDiagnostics* diag = nullptr);

/// Unit normal of the fitted surface at the origin, z component positive.
Vec3 jet_normal(const JetCoefficients& jet);

/// Shape operator of the graph z = f(x, y) at the origin of the fitting frame.
/// Requires order >= 2.
Eigen::Matrix2d weingarten(const JetCoefficients& jet);

CurvaturePair principal_curvatures(const JetCoefficients& jet);

/// Surface normal at each sample point, from the analytic gradient of the
/// implicit form z - f(x, y) = 0. At (0, 0) this equals jet_normal exactly.
std::vector<Vec3> neighbor_normals(const JetCoefficients& jet,
                                   const Eigen::Ref<const Eigen::MatrixX2d>& points2d);

double evaluate_jet(const JetCoefficients& jet, double x, double y);

/// (df/dx, df/dy) at (x, y).
Eigen::Vector2d jet_gradient(const JetCoefficients& jet, double x, double y);

/// normalize(-gx, -gy, 1); shared by jet_normal and neighbor_normals.
Vec3 normal_from_height_gradient(double gx, double gy);

}  // namespace jetfit
