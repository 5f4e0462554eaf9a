#include "jetfit/weightnet.hpp"

#include <cmath>
#include <map>
#include <random>

namespace jetfit {

namespace {

template <typename Params, typename Fn>
void visit_trainable_impl(Params& p, const Fn& fn) {
  auto linear = [&fn](const std::string& name, auto& lin) {
    fn(name + ".w", lin.w);
    fn(name + ".b", lin.b);
  };
  auto norm = [&fn](const std::string& name, auto& n) {
    fn(name + ".gain", n.gain);
    fn(name + ".bias", n.bias);
  };
  auto align = [&](const std::string& name, auto& t) {
    linear(name + ".l1", t.l1);
    norm(name + ".n1", t.n1);
    linear(name + ".l2", t.l2);
    norm(name + ".n2", t.n2);
    linear(name + ".l3", t.l3);
    norm(name + ".n3", t.n3);
    linear(name + ".fc1", t.fc1);
    linear(name + ".fc2", t.fc2);
    linear(name + ".fc3", t.fc3);
  };
  align("tnet1", p.tnet1);
  linear("conv1", p.conv1);
  norm("norm1", p.norm1);
  linear("conv2", p.conv2);
  norm("norm2", p.norm2);
  align("tnet2", p.tnet2);
  linear("conv3", p.conv3);
  norm("norm3", p.norm3);
  linear("conv4", p.conv4);
  norm("norm4", p.norm4);
  linear("head1", p.head1);
  norm("hnorm1", p.hnorm1);
  linear("head2", p.head2);
  norm("hnorm2", p.hnorm2);
  linear("head3", p.head3);
  norm("hnorm3", p.hnorm3);
  linear("head4", p.head4);
}

template <typename Params, typename Fn>
void visit_buffers_impl(Params& p, const Fn& fn) {
  auto norm = [&fn](const std::string& name, auto& n) {
    fn(name + ".running_mean", n.running_mean);
    fn(name + ".running_var", n.running_var);
  };
  auto align = [&](const std::string& name, auto& t) {
    norm(name + ".n1", t.n1);
    norm(name + ".n2", t.n2);
    norm(name + ".n3", t.n3);
  };
  align("tnet1", p.tnet1);
  norm("norm1", p.norm1);
  norm("norm2", p.norm2);
  align("tnet2", p.tnet2);
  norm("norm3", p.norm3);
  norm("norm4", p.norm4);
  norm("hnorm1", p.hnorm1);
  norm("hnorm2", p.hnorm2);
  norm("hnorm3", p.hnorm3);
}

}  // namespace

void WeightNetParams::visit_trainable(
    const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
  visit_trainable_impl(*this, fn);
}

void WeightNetParams::visit_trainable(
    const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const {
  visit_trainable_impl(*this, fn);
}

void WeightNetParams::visit_buffers(
    const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
  visit_buffers_impl(*this, fn);
}

void WeightNetParams::visit_buffers(
    const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const {
  visit_buffers_impl(*this, fn);
}

FeatureNorm* WeightNetParams::find_norm(const std::string& prefix) {
  std::map<std::string, FeatureNorm*> norms;
  auto add = [&norms](const std::string& name, FeatureNorm& n) { norms[name] = &n; };
  add("tnet1.n1", tnet1.n1);
  add("tnet1.n2", tnet1.n2);
  add("tnet1.n3", tnet1.n3);
  add("norm1", norm1);
  add("norm2", norm2);
  add("tnet2.n1", tnet2.n1);
  add("tnet2.n2", tnet2.n2);
  add("tnet2.n3", tnet2.n3);
  add("norm3", norm3);
  add("norm4", norm4);
  add("hnorm1", hnorm1);
  add("hnorm2", hnorm2);
  add("hnorm3", hnorm3);
  auto it = norms.find(prefix);
  return it == norms.end() ? nullptr : it->second;
}

namespace {

Linear make_linear(std::mt19937_64& gen, int in, int out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Linear lin;
  lin.w.resize(in, out);
  for (int i = 0; i < in; ++i)
    for (int j = 0; j < out; ++j) lin.w(i, j) = dist(gen);
  lin.b.resize(1, out);
  for (int j = 0; j < out; ++j) lin.b(0, j) = dist(gen);
  return lin;
}

FeatureNorm make_norm(int width) {
  FeatureNorm n;
  n.gain = Eigen::MatrixXd::Ones(1, width);
  n.bias = Eigen::MatrixXd::Zero(1, width);
  n.running_mean = Eigen::MatrixXd::Zero(1, width);
  n.running_var = Eigen::MatrixXd::Ones(1, width);
  return n;
}

AlignNet make_align(std::mt19937_64& gen, const WeightNetConfig& c, int in) {
  AlignNet t;
  t.l1 = make_linear(gen, in, c.local_width);
  t.n1 = make_norm(c.local_width);
  t.l2 = make_linear(gen, c.local_width, c.mid_width);
  t.n2 = make_norm(c.mid_width);
  t.l3 = make_linear(gen, c.mid_width, c.global_width);
  t.n3 = make_norm(c.global_width);
  t.fc1 = make_linear(gen, c.global_width, c.head_widths[0]);
  t.fc2 = make_linear(gen, c.head_widths[0], c.head_widths[1]);
  t.fc3 = make_linear(gen, c.head_widths[1], in * in);
  // Start at the identity transform.
  t.fc3.w.setZero();
  t.fc3.b.setZero();
  for (int i = 0; i < in; ++i) t.fc3.b(0, i * in + i) = 1.0;
  return t;
}

}  // namespace

WeightNetParams init_params(const WeightNetConfig& config, uint64_t seed) {
  if (config.local_width < 1 || config.mid_width < 1 || config.global_width < 1 ||
      config.head_widths[0] < 1 || config.head_widths[1] < 1 || config.head_widths[2] < 1)
    throw InvalidInput("init_params: widths must be positive");
  if (!(config.epsilon > 0.0))
    throw InvalidInput("init_params: epsilon must be positive");

  std::mt19937_64 gen(seed);
  WeightNetParams p;
  p.config = config;
  p.tnet1 = make_align(gen, config, 3);
  p.conv1 = make_linear(gen, 3, config.local_width);
  p.norm1 = make_norm(config.local_width);
  p.conv2 = make_linear(gen, config.local_width, config.local_width);
  p.norm2 = make_norm(config.local_width);
  p.tnet2 = make_align(gen, config, config.local_width);
  p.conv3 = make_linear(gen, config.local_width, config.mid_width);
  p.norm3 = make_norm(config.mid_width);
  p.conv4 = make_linear(gen, config.mid_width, config.global_width);
  p.norm4 = make_norm(config.global_width);
  const int cat_width = config.global_width + config.local_width;
  p.head1 = make_linear(gen, cat_width, config.head_widths[0]);
  p.hnorm1 = make_norm(config.head_widths[0]);
  p.head2 = make_linear(gen, config.head_widths[0], config.head_widths[1]);
  p.hnorm2 = make_norm(config.head_widths[1]);
  p.head3 = make_linear(gen, config.head_widths[1], config.head_widths[2]);
  p.hnorm3 = make_norm(config.head_widths[2]);
  p.head4 = make_linear(gen, config.head_widths[2], 1);
  return p;
}

namespace {

struct GraphBuilder {
  ad::Tape& tape;
  const WeightNetParams& params;
  NetMode mode;
  std::vector<std::pair<std::string, ad::NormStats>>* stats;

  ad::Var leaf(const Eigen::MatrixXd& m) {
    return mode == NetMode::kTrain ? tape.param(&m) : tape.external_const(&m);
  }

  ad::Var linear(ad::Var x, const Linear& lin) {
    return tape.add_rowvec(tape.matmul(x, leaf(lin.w)), leaf(lin.b));
  }

  // Normalization always uses the running statistics, so training and
  // inference compute the same function; training additionally reports the
  // batch statistics of the pre-norm activations for the EMA update.
  ad::Var norm(ad::Var x, const FeatureNorm& n, const std::string& name) {
    if (mode == NetMode::kTrain) {
      const Eigen::MatrixXd& xv = tape.val(x);
      ad::NormStats s;
      s.mean = xv.colwise().mean();
      s.var = (xv.rowwise() - s.mean).array().square().colwise().mean();
      stats->emplace_back(name, std::move(s));
    }
    return tape.feature_norm_eval(x, leaf(n.gain), leaf(n.bias), n.running_mean,
                                  n.running_var, params.config.norm_eps);
  }

  ad::Var block(ad::Var x, const Linear& lin, const FeatureNorm& n,
                const std::string& name) {
    ad::Var out = tape.relu(norm(linear(x, lin), n, name));
    tape.check_finite(out, name);
    return out;
  }

  // Shared layers, max pool, and the compact head producing a square
  // alignment matrix.
  ad::Var align(ad::Var x, const AlignNet& t, int dim, const std::string& name) {
    ad::Var h = block(x, t.l1, t.n1, name + ".n1");
    h = block(h, t.l2, t.n2, name + ".n2");
    h = block(h, t.l3, t.n3, name + ".n3");
    ad::Var pooled = tape.colwise_max(h);
    ad::Var f = tape.relu(linear(pooled, t.fc1));
    f = tape.relu(linear(f, t.fc2));
    ad::Var flat = linear(f, t.fc3);
    tape.check_finite(flat, name + ".fc3");
    return tape.reshape_rowmajor(flat, dim, dim);
  }
};

}  // namespace

NetForward weightnet_forward(ad::Tape& tape, const WeightNetParams& params,
                             const Eigen::MatrixXd& points, NetMode mode) {
  if (points.rows() < 2) throw InvalidInput("weightnet_forward: need at least 2 points");
  if (points.cols() != 3) throw InvalidInput("weightnet_forward: points must be k x 3");
  if (!points.allFinite()) throw InvalidInput("weightnet_forward: non-finite input point");

  NetForward out;
  GraphBuilder g{tape, params, mode, &out.norm_stats};
  const WeightNetConfig& c = params.config;
  const int k = static_cast<int>(points.rows());

  ad::Var x = tape.constant(points);
  if (c.input_transform) {
    out.transform1 = g.align(x, params.tnet1, 3, "tnet1");
    x = tape.matmul(x, out.transform1);
  } else {
    out.transform1 = tape.constant(Eigen::MatrixXd::Identity(3, 3));
  }

  ad::Var h = g.block(x, params.conv1, params.norm1, "norm1");
  h = g.block(h, params.conv2, params.norm2, "norm2");

  if (c.feature_transform) {
    out.transform2 = g.align(h, params.tnet2, c.local_width, "tnet2");
    out.local_features = tape.matmul(h, out.transform2);
  } else {
    out.transform2 =
        tape.constant(Eigen::MatrixXd::Identity(c.local_width, c.local_width));
    out.local_features = h;
  }
  tape.check_finite(out.local_features, "local_features");

  ad::Var deep = g.block(out.local_features, params.conv3, params.norm3, "norm3");
  deep = g.block(deep, params.conv4, params.norm4, "norm4");
  out.global_feature = tape.colwise_max(deep);

  ad::Var cat = tape.hconcat(tape.replicate_row(out.global_feature, k),
                             out.local_features);
  ad::Var z = g.block(cat, params.head1, params.hnorm1, "hnorm1");
  z = g.block(z, params.head2, params.hnorm2, "hnorm2");
  z = g.block(z, params.head3, params.hnorm3, "hnorm3");
  ad::Var logits = g.linear(z, params.head4);
  tape.check_finite(logits, "head4");
  out.weights = tape.add_scalar(tape.sigmoid(logits), c.epsilon);
  return out;
}

WeightNetOutput forward(const WeightNetParams& params,
                        const Eigen::MatrixX3d& local_points) {
  ad::Tape tape;
  const NetForward fw = weightnet_forward(tape, params, local_points, NetMode::kEval);
  WeightNetOutput out;
  out.weights = tape.val(fw.weights).col(0);
  out.input_transform = tape.val(fw.transform1);
  out.feature_transform = tape.val(fw.transform2);
  out.global_feature = tape.val(fw.global_feature).row(0).transpose();
  out.local_features = tape.val(fw.local_features);
  return out;
}

void update_running_stats(
    WeightNetParams& params,
    const std::vector<std::vector<std::pair<std::string, ad::NormStats>>>& collected) {
  std::map<std::string, std::pair<ad::NormStats, int>> sums;
  for (const auto& sample : collected)
    for (const auto& [name, s] : sample) {
      auto it = sums.find(name);
      if (it == sums.end()) {
        sums.emplace(name, std::make_pair(s, 1));
      } else {
        it->second.first.mean += s.mean;
        it->second.first.var += s.var;
        it->second.second += 1;
      }
    }
  const double momentum = params.config.norm_momentum;
  for (auto& [name, acc] : sums) {
    FeatureNorm* n = params.find_norm(name);
    if (n == nullptr) throw InvalidInput("update_running_stats: unknown layer " + name);
    const double inv = 1.0 / static_cast<double>(acc.second);
    n->running_mean.row(0) =
        (1.0 - momentum) * n->running_mean.row(0) + momentum * inv * acc.first.mean;
    n->running_var.row(0) =
        (1.0 - momentum) * n->running_var.row(0) + momentum * inv * acc.first.var;
  }
}

}  // namespace jetfit
