#include "jetfit/tape.hpp"

#include <cmath>
#include <memory>

#include "jetfit/jet.hpp"

namespace jetfit::ad {

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, false, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Mat* storage) {
  auto it = param_ids_.find(storage);
  if (it != param_ids_.end()) return Var{it->second};
  nodes_.push_back(Node{{}, storage, {}, true, nullptr});
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(storage, id);
  return Var{id};
}

Var Tape::external_const(const Mat* storage) {
  nodes_.push_back(Node{{}, storage, {}, false, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::val(Var v) const { return node(v.id).v(); }

const Mat& Tape::grad(Var v) const {
  const Node& n = node(v.id);
  return n.grad.size() != 0 ? n.grad : empty_;
}

const Mat& Tape::grad_of_param(const Mat* storage) const {
  auto it = param_ids_.find(storage);
  return it == param_ids_.end() ? empty_ : grad(Var{it->second});
}

Mat& Tape::grad_ref(int id) {
  Node& n = node(id);
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.v().rows(), n.v().cols());
  return n.grad;
}

void Tape::accumulate(int id, const Mat& g) {
  if (!node(id).needs_grad) return;
  grad_ref(id) += g;
}

Var Tape::push(Mat value, bool needs_grad, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, needs_grad,
                        needs_grad ? std::move(back) : nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var output) {
  const Node& out = node(output.id);
  if (out.v().rows() != 1 || out.v().cols() != 1)
    throw InvalidInput("backward: output must be a 1x1 scalar node");
  grad_ref(output.id).setConstant(1.0);
  for (int i = output.id; i >= 0; --i) {
    Node& n = node(i);
    if (n.back && n.grad.size() != 0) n.back(*this);
  }
}

void Tape::check_finite(Var v, const std::string& stage) const {
  if (!val(v).allFinite())
    throw NumericalFault("non-finite values produced at stage '" + stage + "'");
}

Var Tape::add(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  Var out = push(val(a) + val(b), needs_grad(a) || needs_grad(b), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, ib, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      t.accumulate(ia, g);
      t.accumulate(ib, g);
    };
  }
  return out;
}

Var Tape::sub(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  Var out = push(val(a) - val(b), needs_grad(a) || needs_grad(b), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, ib, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      t.accumulate(ia, g);
      if (t.node(ib).needs_grad) t.grad_ref(ib) -= g;
    };
  }
  return out;
}

Var Tape::cwise_mul(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  Var out = push(val(a).cwiseProduct(val(b)), needs_grad(a) || needs_grad(b), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, ib, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      t.accumulate(ia, g.cwiseProduct(t.val(Var{ib})));
      t.accumulate(ib, g.cwiseProduct(t.val(Var{ia})));
    };
  }
  return out;
}

Var Tape::scale(Var a, double s) {
  const int ia = a.id;
  Var out = push(val(a) * s, needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, s, self](Tape& t) {
      t.accumulate(ia, t.node(self).grad * s);
    };
  }
  return out;
}

Var Tape::add_scalar(Var a, double s) {
  const int ia = a.id;
  Var out = push((val(a).array() + s).matrix(), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) { t.accumulate(ia, t.node(self).grad); };
  }
  return out;
}

Var Tape::matmul(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  if (val(a).cols() != val(b).rows())
    throw InvalidInput("matmul: inner dimensions disagree");
  Var out = push(val(a) * val(b), needs_grad(a) || needs_grad(b), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, ib, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      if (t.node(ia).needs_grad) t.grad_ref(ia).noalias() += g * t.val(Var{ib}).transpose();
      if (t.node(ib).needs_grad) t.grad_ref(ib).noalias() += t.val(Var{ia}).transpose() * g;
    };
  }
  return out;
}

Var Tape::transpose(Var a) {
  const int ia = a.id;
  Var out = push(val(a).transpose(), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      t.accumulate(ia, t.node(self).grad.transpose());
    };
  }
  return out;
}

Var Tape::add_rowvec(Var x, Var row) {
  const int ix = x.id, ir = row.id;
  if (val(row).rows() != 1 || val(row).cols() != val(x).cols())
    throw InvalidInput("add_rowvec: row vector shape mismatch");
  Var out = push(val(x).rowwise() + val(row).row(0), needs_grad(x) || needs_grad(row),
                 nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ix, ir, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      t.accumulate(ix, g);
      if (t.node(ir).needs_grad) t.grad_ref(ir) += g.colwise().sum();
    };
  }
  return out;
}

Var Tape::relu(Var a) {
  const int ia = a.id;
  Var out = push(val(a).cwiseMax(0.0), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      const Mat mask = (t.val(Var{ia}).array() > 0.0).cast<double>().matrix();
      t.accumulate(ia, t.node(self).grad.cwiseProduct(mask));
    };
  }
  return out;
}

Var Tape::sigmoid(Var a) {
  const int ia = a.id;
  Mat s = (1.0 / (1.0 + (-val(a)).array().exp())).matrix();
  Var out = push(std::move(s), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      const Mat& sv = t.node(self).value;
      const Mat ds = sv.array() * (1.0 - sv.array());
      t.accumulate(ia, t.node(self).grad.cwiseProduct(ds));
    };
  }
  return out;
}

Var Tape::log_elem(Var a) {
  const int ia = a.id;
  if ((val(a).array() <= 0.0).any())
    throw InvalidInput("log_elem: arguments must be strictly positive");
  Var out = push(val(a).array().log().matrix(), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      t.accumulate(ia, t.node(self).grad.cwiseQuotient(t.val(Var{ia})));
    };
  }
  return out;
}

Var Tape::abs_elem(Var a) {
  const int ia = a.id;
  Var out = push(val(a).cwiseAbs(), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      const Mat sign = t.val(Var{ia}).array().sign().matrix();
      t.accumulate(ia, t.node(self).grad.cwiseProduct(sign));
    };
  }
  return out;
}

Var Tape::sum(Var a) {
  const int ia = a.id;
  Mat s(1, 1);
  s(0, 0) = val(a).sum();
  Var out = push(std::move(s), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      const double g = t.node(self).grad(0, 0);
      t.grad_ref(ia).array() += g;
    };
  }
  return out;
}

Var Tape::colwise_max(Var a) {
  const int ia = a.id;
  const Mat& x = val(a);
  Mat out_val(1, x.cols());
  std::vector<int> argmax(static_cast<size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Index row = 0;
    out_val(0, j) = x.col(j).maxCoeff(&row);
    argmax[static_cast<size_t>(j)] = static_cast<int>(row);
  }
  Var out = push(std::move(out_val), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self, argmax = std::move(argmax)](Tape& t) {
      const Mat& g = t.node(self).grad;
      Mat& ga = t.grad_ref(ia);
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        ga(argmax[static_cast<size_t>(j)], j) += g(0, j);
    };
  }
  return out;
}

Var Tape::replicate_row(Var row, int rows) {
  const int ir = row.id;
  if (val(row).rows() != 1) throw InvalidInput("replicate_row: input must be 1xc");
  Var out = push(val(row).replicate(rows, 1), needs_grad(row), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ir, self](Tape& t) {
      t.accumulate(ir, t.node(self).grad.colwise().sum());
    };
  }
  return out;
}

Var Tape::hconcat(Var a, Var b) {
  const int ia = a.id, ib = b.id;
  if (val(a).rows() != val(b).rows()) throw InvalidInput("hconcat: row counts disagree");
  Mat joined(val(a).rows(), val(a).cols() + val(b).cols());
  joined << val(a), val(b);
  Var out = push(std::move(joined), needs_grad(a) || needs_grad(b), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    const Eigen::Index ca = val(a).cols(), cb = val(b).cols();
    node(out.id).back = [ia, ib, ca, cb, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      t.accumulate(ia, g.leftCols(ca));
      t.accumulate(ib, g.rightCols(cb));
    };
  }
  return out;
}

Var Tape::reshape_rowmajor(Var a, int rows, int cols) {
  const int ia = a.id;
  const Mat& x = val(a);
  if (x.size() != static_cast<Eigen::Index>(rows) * cols)
    throw InvalidInput("reshape_rowmajor: element count mismatch");
  Mat y(rows, cols);
  {
    Eigen::Index flat = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j, ++flat)
        y(flat / cols, flat % cols) = x(i, j);
  }
  Var out = push(std::move(y), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      Mat& ga = t.grad_ref(ia);
      Eigen::Index flat = 0;
      for (Eigen::Index i = 0; i < ga.rows(); ++i)
        for (Eigen::Index j = 0; j < ga.cols(); ++j, ++flat)
          ga(i, j) += g(flat / g.cols(), flat % g.cols());
    };
  }
  return out;
}

Var Tape::rows_normalize(Var a) {
  const int ia = a.id;
  const Mat& x = val(a);
  Eigen::VectorXd norms = x.rowwise().norm();
  if ((norms.array() <= 0.0).any())
    throw NumericalFault("rows_normalize: zero-length row");
  Mat y = norms.cwiseInverse().asDiagonal() * x;
  Var out = push(std::move(y), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self, norms = std::move(norms)](Tape& t) {
      const Mat& g = t.node(self).grad;
      const Mat& n = t.node(self).value;  // unit rows
      Mat& ga = t.grad_ref(ia);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double along = g.row(i).dot(n.row(i));
        ga.row(i) += (g.row(i) - along * n.row(i)) / norms[i];
      }
    };
  }
  return out;
}

Var Tape::rowwise_norm(Var a) {
  const int ia = a.id;
  Mat y = val(a).rowwise().norm();
  Var out = push(std::move(y), needs_grad(a), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ia, self](Tape& t) {
      const Mat& g = t.node(self).grad;
      const Mat& x = t.val(Var{ia});
      const Mat& y = t.node(self).value;
      Mat& ga = t.grad_ref(ia);
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (y(i, 0) > 0.0) ga.row(i) += (g(i, 0) / y(i, 0)) * x.row(i);
    };
  }
  return out;
}

Var Tape::feature_norm_train(Var x, Var gain, Var bias, double eps, NormStats* stats_out) {
  const int ix = x.id, ig = gain.id, ib = bias.id;
  const Mat& xv = val(x);
  const double k = static_cast<double>(xv.rows());
  Eigen::RowVectorXd mean = xv.colwise().mean();
  Mat centered = xv.rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  Eigen::RowVectorXd inv_std = (var.array() + eps).sqrt().inverse().matrix();
  Mat xhat = centered;
  xhat.array().rowwise() *= inv_std.array();
  if (stats_out != nullptr) {
    stats_out->mean = mean;
    stats_out->var = var;
  }
  Mat y = xhat;
  y.array().rowwise() *= val(gain).row(0).array();
  y.array().rowwise() += val(bias).row(0).array();
  Var out = push(std::move(y), needs_grad(x) || needs_grad(gain) || needs_grad(bias),
                 nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ix, ig, ib, self, k, xhat = std::move(xhat),
                         inv_std = std::move(inv_std)](Tape& t) {
      const Mat& g = t.node(self).grad;
      if (t.node(ib).needs_grad) t.grad_ref(ib) += g.colwise().sum();
      if (t.node(ig).needs_grad)
        t.grad_ref(ig) += g.cwiseProduct(xhat).colwise().sum();
      if (t.node(ix).needs_grad) {
        // d/dx of (x - mu)/sqrt(var + eps), batch statistics included.
        Mat dxhat = g;
        dxhat.array().rowwise() *= t.val(Var{ig}).row(0).array();
        const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dxhat_xhat =
            dxhat.cwiseProduct(xhat).colwise().sum();
        Mat dx = dxhat * k;
        dx.rowwise() -= sum_dxhat;
        Mat correction = xhat;
        correction.array().rowwise() *= sum_dxhat_xhat.array();
        dx -= correction;
        dx.array().rowwise() *= (inv_std / k).array();
        t.grad_ref(ix) += dx;
      }
    };
  }
  return out;
}

Var Tape::feature_norm_eval(Var x, Var gain, Var bias, const Mat& running_mean,
                            const Mat& running_var, double eps) {
  const int ix = x.id, ig = gain.id, ib = bias.id;
  Eigen::RowVectorXd inv_std =
      (running_var.row(0).array() + eps).sqrt().inverse().matrix();
  Mat xhat = val(x).rowwise() - running_mean.row(0);
  xhat.array().rowwise() *= inv_std.array();
  Mat y = xhat;
  y.array().rowwise() *= val(gain).row(0).array();
  y.array().rowwise() += val(bias).row(0).array();
  Var out = push(std::move(y), needs_grad(x) || needs_grad(gain) || needs_grad(bias),
                 nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    node(out.id).back = [ix, ig, ib, self, xhat = std::move(xhat),
                         inv_std = std::move(inv_std)](Tape& t) {
      const Mat& g = t.node(self).grad;
      if (t.node(ib).needs_grad) t.grad_ref(ib) += g.colwise().sum();
      if (t.node(ig).needs_grad)
        t.grad_ref(ig) += g.cwiseProduct(xhat).colwise().sum();
      if (t.node(ix).needs_grad) {
        Mat dx = g;
        dx.array().rowwise() *= (t.val(Var{ig}).row(0).array() * inv_std.array());
        t.grad_ref(ix) += dx;
      }
    };
  }
  return out;
}

Var Tape::wls_solve(Var w, const Mat& design_values, const Mat& heights,
                    const Mat& precond_diag, double ridge, WlsNodeInfo* info) {
  const int iw = w.id;
  if (val(w).cols() != 1) throw InvalidInput("wls_solve: weights must be kx1");
  auto sol = std::make_shared<WlsSolution>(solve_wls_detailed(
      design_values, val(w).col(0), heights.col(0), precond_diag.col(0), ridge));
  if (info != nullptr) {
    info->ridge_used = sol->ridge_used;
    info->escalations = sol->escalations;
  }
  Mat beta = sol->beta;
  Var out = push(std::move(beta), needs_grad(w), nullptr);
  if (node(out.id).needs_grad) {
    const int self = out.id;
    Mat heights_copy = heights;
    Mat precond_copy = precond_diag;
    node(out.id).back = [iw, self, sol, heights_copy = std::move(heights_copy),
                         precond_copy = std::move(precond_copy)](Tape& t) {
      // beta' solves (M'^T W M' + r I) beta' = M'^T W B. For the adjoint,
      // solve the same (symmetric) system for lambda and combine with the
      // per-point residuals of the preconditioned system.
      const Mat& g = t.node(self).grad;                       // dL/dbeta
      const Eigen::VectorXd g_scaled = g.col(0).cwiseQuotient(precond_copy.col(0));
      const Eigen::VectorXd lambda = sol->llt.solve(g_scaled);
      const Eigen::VectorXd proj = sol->scaled_design * lambda;           // M' lambda
      const Eigen::VectorXd residual =
          heights_copy.col(0) - sol->scaled_design * sol->scaled_beta;    // B - M' beta'
      t.accumulate(iw, proj.cwiseProduct(residual));
    };
  }
  return out;
}

}  // namespace jetfit::ad
