#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <vector>

#include "jetfit/checkpoint.hpp"
#include "jetfit/losses.hpp"
#include "jetfit/optimizer.hpp"
#include "jetfit/pointcloud.hpp"

namespace jetfit {

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-3;
  int epochs = 10;
  int samples_per_epoch = 32768;
  int k_neighbors = 256;
  int jet_order = 3;
  uint64_t seed = 1;
  double alpha1 = 1.0;
  double alpha2 = 0.1;
  double ridge = 1e-8;
  double epsilon = 1e-4;
  WeightNetConfig net;              // encoder widths; epsilon above wins
  bool consistency_log_term = true; // ablation knob for the log barrier
  double val_fraction = 0.1;
  int threads = 1;                  // 0 = hardware concurrency
  std::string resume;               // optional checkpoint to continue from

  void validate() const;
};

nlohmann::ordered_json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochLog {
  int epoch = 0;
  double total = 0.0, sin = 0.0, consistency = 0.0, reg = 0.0;
  double val_rmse_deg = 0.0;
  double mean_weight = 0.0;
  int skipped_samples = 0;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path metrics_csv;
  double best_val_rmse_deg = 0.0;
  int best_epoch = -1;
  std::vector<EpochLog> log;
};

/// Trains the weight network on the given shapes (ground-truth normals
/// required). Per epoch the query points are resampled; a fixed seed-derived
/// validation split is held out and the best-by-validation checkpoint kept.
/// Single-threaded runs are bitwise reproducible.
TrainResult train(const TrainConfig& config, const std::vector<PointCloud>& shapes,
                  const std::filesystem::path& outdir, std::ostream* progress = nullptr);

}  // namespace jetfit
