#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>

#include "jetfit/errors.hpp"

namespace jetfit::ad {

using Mat = Eigen::MatrixXd;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

struct NormStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
};

struct WlsNodeInfo {
  double ridge_used = 0.0;
  int escalations = 0;
};

/// Define-by-run reverse-mode tape over dense matrices. A tape is built per
/// sample: leaves are either constants (no gradient) or parameters referencing
/// external storage. Nodes whose inputs carry no gradient record no backward
/// closure, so inference-mode graphs cost only the forward arithmetic.
class Tape {
 public:
  Var constant(Mat value);
  Var param(const Mat* storage);
  /// Leaf referencing external storage that never receives a gradient.
  Var external_const(const Mat* storage);

  const Mat& val(Var v) const;
  /// Gradient accumulated into v by the last backward(); zero-sized if v was
  /// never reached.
  const Mat& grad(Var v) const;
  /// Gradient of the param leaf registered for `storage`; zero-sized if the
  /// leaf does not exist or was never reached.
  const Mat& grad_of_param(const Mat* storage) const;
  bool needs_grad(Var v) const { return node(v.id).needs_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Seeds d(output) = 1 and propagates to every reachable node. `output`
  /// must be 1x1.
  void backward(Var output);

  /// Throws NumericalFault naming `stage` if the value holds a non-finite entry.
  void check_finite(Var v, const std::string& stage) const;

  // ---- elementwise / structural ops ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cwise_mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_rowvec(Var x, Var row);      // broadcast 1xc over kxc
  Var relu(Var a);
  Var sigmoid(Var a);
  Var log_elem(Var a);
  Var abs_elem(Var a);
  Var sum(Var a);                      // 1x1
  Var colwise_max(Var a);              // 1xc, gradient routed to first argmax
  Var replicate_row(Var row, int rows);
  Var hconcat(Var a, Var b);
  Var reshape_rowmajor(Var a, int rows, int cols);

  // ---- geometry ops ----
  Var rows_normalize(Var a);           // kx3, rows scaled to unit norm
  Var rowwise_norm(Var a);             // kxc -> kx1

  // ---- feature normalization ----
  Var feature_norm_train(Var x, Var gain, Var bias, double eps, NormStats* stats_out);
  Var feature_norm_eval(Var x, Var gain, Var bias, const Mat& running_mean,
                        const Mat& running_var, double eps);

  /// Weighted least-squares solve through the preconditioned normal equations.
  /// `w` is kx1; the remaining arguments are constants of the node. Returns
  /// the coefficient vector in unpreconditioned units (nx1). The adjoint of w
  /// comes from implicit differentiation of the normal equations, reusing the
  /// forward factorization.
  Var wls_solve(Var w, const Mat& design_values, const Mat& heights,
                const Mat& precond_diag, double ridge, WlsNodeInfo* info = nullptr);

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&)> back;

    const Mat& v() const { return external != nullptr ? *external : value; }
  };

  const Node& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
  Node& node(int id) { return nodes_.at(static_cast<size_t>(id)); }
  Mat& grad_ref(int id);
  void accumulate(int id, const Mat& g);
  Var push(Mat value, bool needs_grad, std::function<void(Tape&)> back);

  std::deque<Node> nodes_;
  std::unordered_map<const Mat*, int> param_ids_;
  Mat empty_;
};

}  // namespace jetfit::ad
