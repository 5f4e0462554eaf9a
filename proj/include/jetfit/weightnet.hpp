#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "jetfit/neighborhood.hpp"
#include "jetfit/tape.hpp"

namespace jetfit {

/// Widths of the point-set encoder. Defaults give the full-size network; the
/// tests and desk-scale training shrink everything proportionally.
struct WeightNetConfig {
  int local_width = 64;
  int mid_width = 128;
  int global_width = 1024;
  std::array<int, 3> head_widths{512, 256, 128};
  bool input_transform = true;
  bool feature_transform = true;
  double epsilon = 1e-4;       // lower bound added to the sigmoid output
  double norm_eps = 1e-5;
  double norm_momentum = 0.1;  // running-statistics update rate
};

struct Linear {
  Eigen::MatrixXd w;  // in x out
  Eigen::MatrixXd b;  // 1 x out
};

struct FeatureNorm {
  Eigen::MatrixXd gain;          // 1 x c
  Eigen::MatrixXd bias;          // 1 x c
  Eigen::MatrixXd running_mean;  // 1 x c, frozen at inference
  Eigen::MatrixXd running_var;   // 1 x c
};

/// Alignment subnetwork: shared layers, max pool, and a small head whose last
/// layer starts at zero weights with an identity bias so the predicted
/// transform begins as the identity.
struct AlignNet {
  Linear l1, l2, l3;
  FeatureNorm n1, n2, n3;
  Linear fc1, fc2, fc3;
};

struct WeightNetParams {
  WeightNetConfig config;
  AlignNet tnet1;               // 3x3 input alignment
  Linear conv1, conv2;          // 3 -> local -> local
  FeatureNorm norm1, norm2;
  AlignNet tnet2;               // local x local feature alignment
  Linear conv3, conv4;          // local -> mid -> global
  FeatureNorm norm3, norm4;
  Linear head1, head2, head3, head4;
  FeatureNorm hnorm1, hnorm2, hnorm3;

  /// Enumerates trainable tensors in a fixed canonical order.
  void visit_trainable(const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
  void visit_trainable(
      const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const;
  /// Enumerates running statistics (non-trainable buffers).
  void visit_buffers(const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
  void visit_buffers(
      const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const;

  /// Pointer to a norm layer by canonical prefix (e.g. "norm1", "tnet2.n3").
  FeatureNorm* find_norm(const std::string& prefix);
};

/// Deterministic initialization; alignment transforms start at the identity.
WeightNetParams init_params(const WeightNetConfig& config, uint64_t seed);

struct WeightNetOutput {
  Eigen::VectorXd weights;            // k, each in (epsilon, 1 + epsilon]
  Eigen::Matrix3d input_transform;
  Eigen::MatrixXd feature_transform;  // local x local
  Eigen::VectorXd global_feature;
  Eigen::MatrixXd local_features;     // k x local
};

enum class NetMode { kTrain, kEval };

struct NetForward {
  ad::Var weights;         // k x 1
  ad::Var transform1;      // 3 x 3
  ad::Var transform2;      // local x local
  ad::Var global_feature;  // 1 x global
  ad::Var local_features;  // k x local
  // Batch statistics per executed norm layer, keyed by canonical prefix;
  // populated in training mode only.
  std::vector<std::pair<std::string, ad::NormStats>> norm_stats;
};

/// Builds the encoder graph on the tape. Normalization layers always apply
/// the running statistics (frozen at inference), so both modes compute the
/// same function; kTrain additionally registers parameters as gradient leaves
/// and reports per-layer batch statistics for the running-average update,
/// while kEval records no backward closures at all.
NetForward weightnet_forward(ad::Tape& tape, const WeightNetParams& params,
                             const Eigen::MatrixXd& points, NetMode mode);

/// Inference entry point; `local_points` are patch coordinates.
WeightNetOutput forward(const WeightNetParams& params,
                        const Eigen::MatrixX3d& local_points);

inline WeightNetOutput forward(const WeightNetParams& params, const Patch& patch) {
  return forward(params, patch.local_points);
}

/// Folds per-sample batch statistics into the running statistics. `collected`
/// holds stats from every sample of a batch; each layer's update uses the mean
/// over the samples that executed it.
void update_running_stats(
    WeightNetParams& params,
    const std::vector<std::vector<std::pair<std::string, ad::NormStats>>>& collected);

}  // namespace jetfit
