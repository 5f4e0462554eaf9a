#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <span>

#include "jetfit/metrics.hpp"
#include "jetfit/pipeline.hpp"
#include "jetfit/pointcloud.hpp"

namespace jetfit {

struct MethodSpec {
  enum class Kind { kNeural, kJet, kPca };
  Kind kind = Kind::kJet;
  std::string label;
  std::optional<int> k_override;  // e.g. "jet@122"
};

/// Accepts "neural", "jet", "pca", optionally with "@<k>" appended.
MethodSpec parse_method(const std::string& text);

struct CategoryStats {
  double rmse_deg = 0.0;
  std::vector<double> pgp_alpha;
  std::vector<double> pgp_value;
  double dk1_rms = -1.0;  // negative when ground-truth curvature is absent
  double dk2_rms = -1.0;
  double ms_per_point = 0.0;
  int64_t point_count = 0;
};

struct EvalReport {
  nlohmann::ordered_json config_echo;
  std::map<std::string, std::map<std::string, CategoryStats>> results;  // method -> category

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string human_table() const;
};

struct ManifestEntry {
  std::filesystem::path basepath;
  std::string category;
};

/// One basepath per line, optionally followed by a category label. Relative
/// paths resolve against the manifest's directory; '#' starts a comment.
std::vector<ManifestEntry> load_shape_manifest(const std::filesystem::path& path);

struct BenchmarkOptions {
  FitConfig fit;
  int threads = 1;
  std::filesystem::path dump_dir;  // per-point error dumps when non-empty
};

EvalReport run_benchmark(std::span<const ManifestEntry> manifest,
                         std::span<const MethodSpec> methods,
                         const BenchmarkOptions& options, const WeightNetParams* net);

/// Per-point sums of the weights each point received across every
/// neighborhood that contains it.
Eigen::VectorXd aggregate_weights(int cloud_size, std::span<const FitResult> fits);

/// Keeps points whose summed weight is at least mean - std of the sums.
PointCloud denoise(const PointCloud& cloud, const Eigen::VectorXd& summed_weights,
                   std::vector<int>* kept = nullptr);

struct CloudFitOutput {
  Eigen::MatrixX3d normals;        // per point, world frame
  Eigen::MatrixX2d curvatures;     // (max, min) by value, sign tied to the normal
  Eigen::VectorXd summed_weights;
};

/// Runs the pipeline at every point of the cloud.
CloudFitOutput fit_cloud(const PointCloud& cloud, const FitConfig& config,
                         const WeightNetParams* net, int threads);

/// Splits [0, count) into chunks and runs them on `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace jetfit
