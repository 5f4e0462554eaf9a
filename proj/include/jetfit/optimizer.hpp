#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "jetfit/tape.hpp"
#include "jetfit/weightnet.hpp"

namespace jetfit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, aligned with visit_trainable order.
struct AdamState {
  int64_t step = 0;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;

  static AdamState zeros_like(const WeightNetParams& params);
};

/// Per-parameter gradient sums in visit_trainable order.
struct GradientSet {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> grads;

  static GradientSet zeros_like(const WeightNetParams& params);
  /// Adds the gradients a backward pass left on the tape. Parameters the loss
  /// never touched contribute nothing.
  void add_from_tape(const ad::Tape& tape, const WeightNetParams& params);
  void add(const GradientSet& other);
  void scale(double s);
  double max_abs() const;
};

/// Bias-corrected first/second moment update.
void adam_step(WeightNetParams& params, const GradientSet& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace jetfit
