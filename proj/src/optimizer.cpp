#include "jetfit/optimizer.hpp"

#include <cmath>

namespace jetfit {

AdamState AdamState::zeros_like(const WeightNetParams& params) {
  AdamState state;
  params.visit_trainable([&state](const std::string&, const Eigen::MatrixXd& t) {
    state.m.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    state.v.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  });
  return state;
}

GradientSet GradientSet::zeros_like(const WeightNetParams& params) {
  GradientSet g;
  params.visit_trainable([&g](const std::string& name, const Eigen::MatrixXd& t) {
    g.names.push_back(name);
    g.grads.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  });
  return g;
}

void GradientSet::add_from_tape(const ad::Tape& tape, const WeightNetParams& params) {
  size_t i = 0;
  params.visit_trainable([&](const std::string&, const Eigen::MatrixXd& t) {
    const Eigen::MatrixXd& g = tape.grad_of_param(&t);
    if (g.size() != 0) grads[i] += g;
    ++i;
  });
}

void GradientSet::add(const GradientSet& other) {
  for (size_t i = 0; i < grads.size(); ++i) grads[i] += other.grads[i];
}

void GradientSet::scale(double s) {
  for (auto& g : grads) g *= s;
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& g : grads)
    if (g.size() != 0) m = std::max(m, g.cwiseAbs().maxCoeff());
  return m;
}

void adam_step(WeightNetParams& params, const GradientSet& grads, AdamState& state,
               const AdamConfig& config) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  size_t i = 0;
  params.visit_trainable([&](const std::string&, Eigen::MatrixXd& t) {
    const Eigen::MatrixXd& g = grads.grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] =
        (config.beta2 * state.v[i]).eval() + (1.0 - config.beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd m_hat = state.m[i] / bc1;
    const Eigen::MatrixXd v_hat = state.v[i] / bc2;
    t.array() -=
        config.learning_rate * m_hat.array() / (v_hat.array().sqrt() + config.eps);
    ++i;
  });
}

}  // namespace jetfit
