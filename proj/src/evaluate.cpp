#include "jetfit/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "jetfit/augment.hpp"
#include "jetfit/pcpnet_io.hpp"

namespace jetfit {

MethodSpec parse_method(const std::string& text) {
  MethodSpec spec;
  spec.label = text;
  std::string name = text;
  const auto at = text.find('@');
  if (at != std::string::npos) {
    name = text.substr(0, at);
    try {
      spec.k_override = std::stoi(text.substr(at + 1));
    } catch (const std::exception&) {
      throw UsageError("bad method neighborhood size in '" + text + "'");
    }
    if (*spec.k_override < 3) throw UsageError("method neighborhood size must be >= 3");
  }
  if (name == "neural")
    spec.kind = MethodSpec::Kind::kNeural;
  else if (name == "jet")
    spec.kind = MethodSpec::Kind::kJet;
  else if (name == "pca")
    spec.kind = MethodSpec::Kind::kPca;
  else
    throw UsageError("unknown method '" + name + "' (expected neural, jet or pca)");
  return spec;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count < 2) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&]() {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ManifestEntry> load_shape_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string base, category, extra;
    if (!(ss >> base)) continue;
    if (!(ss >> category)) category = "default";
    if (ss >> extra)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'basepath [category]'");
    std::filesystem::path p(base);
    if (p.is_relative()) p = path.parent_path() / p;
    entries.push_back({std::move(p), std::move(category)});
  }
  if (entries.empty()) throw FormatError("manifest lists no shapes: " + path.string());
  return entries;
}

Eigen::VectorXd aggregate_weights(int cloud_size, std::span<const FitResult> fits) {
  Eigen::VectorXd summed = Eigen::VectorXd::Zero(cloud_size);
  for (const FitResult& fit : fits) {
    if (static_cast<Eigen::Index>(fit.neighbors.size()) != fit.weights.size())
      throw InvalidInput("aggregate_weights: neighbors and weights disagree");
    for (size_t j = 0; j < fit.neighbors.size(); ++j) {
      const int idx = fit.neighbors[j];
      if (idx < 0 || idx >= cloud_size)
        throw InvalidInput("aggregate_weights: neighbor index out of range");
      summed[idx] += fit.weights[static_cast<Eigen::Index>(j)];
    }
  }
  return summed;
}

PointCloud denoise(const PointCloud& cloud, const Eigen::VectorXd& summed_weights,
                   std::vector<int>* kept_out) {
  if (summed_weights.size() != cloud.size())
    throw InvalidInput("denoise: weight sums do not match the cloud size");
  const double mean = summed_weights.mean();
  const double variance = (summed_weights.array() - mean).square().mean();
  const double threshold = mean - std::sqrt(variance);
  std::vector<int> kept;
  for (int i = 0; i < cloud.size(); ++i)
    if (summed_weights[i] >= threshold) kept.push_back(i);
  if (kept_out != nullptr) *kept_out = kept;
  return select_points(cloud, kept);
}

namespace {

struct PointEval {
  double angle_deg = 0.0;
  double dk1 = -1.0;
  double dk2 = -1.0;
};

PointEval evaluate_point(const NeighborIndex& index, int point, const MethodSpec& method,
                         const FitConfig& base, const WeightNetParams* net) {
  const PointCloud& cloud = index.cloud();
  FitConfig config = base;
  if (method.k_override) config.k_neighbors = *method.k_override;
  config.uniform_weights = method.kind != MethodSpec::Kind::kNeural;

  PointEval out;
  const Eigen::Vector3d gt = cloud.gt_normals->row(point).transpose();
  if (method.kind == MethodSpec::Kind::kPca) {
    const auto neighbors = index.knn(point, config.k_neighbors);
    const Patch patch = normalize_patch(cloud, neighbors, point);
    const Eigen::Vector3d normal =
        denormalize_normal(patch, baseline_pca_normal(patch));
    out.angle_deg = angle_error_unoriented_deg(normal, gt);
    return out;
  }

  const FitResult fit = fit_point(
      index, point, config, method.kind == MethodSpec::Kind::kNeural ? net : nullptr);
  out.angle_deg = angle_error_unoriented_deg(fit.normal, gt);

  if (cloud.gt_curvatures && config.jet_order >= 2) {
    double k1 = fit.k1, k2 = fit.k2;
    // The ground-truth orientation fixes the curvature sign.
    if (fit.normal.dot(gt) < 0.0) {
      k1 = -k1;
      k2 = -k2;
    }
    const double est_max = std::max(k1, k2), est_min = std::min(k1, k2);
    out.dk1 = curvature_error(est_max, (*cloud.gt_curvatures)(point, 0));
    out.dk2 = curvature_error(est_min, (*cloud.gt_curvatures)(point, 1));
  }
  return out;
}

struct Accumulator {
  std::vector<double> angles;
  std::vector<double> dk1, dk2;
  double seconds = 0.0;
  int64_t points = 0;
};

std::string sanitize(const std::string& label) {
  std::string out = label;
  for (char& c : out)
    if (c == '@') c = '_';
  return out;
}

}  // namespace

EvalReport run_benchmark(std::span<const ManifestEntry> manifest,
                         std::span<const MethodSpec> methods,
                         const BenchmarkOptions& options, const WeightNetParams* net) {
  for (const MethodSpec& m : methods)
    if (m.kind == MethodSpec::Kind::kNeural && net == nullptr)
      throw UsageError("method 'neural' requires a checkpoint");

  std::map<std::string, std::map<std::string, Accumulator>> acc;
  for (const ManifestEntry& entry : manifest) {
    const PointCloud cloud = load_pcpnet(entry.basepath);
    if (!cloud.gt_normals)
      throw InvalidInput("evaluation requires ground-truth normals: " +
                         entry.basepath.string());
    const NeighborIndex index(cloud);
    std::vector<int> eval_points;
    if (cloud.eval_indices) {
      eval_points = *cloud.eval_indices;
    } else {
      eval_points.resize(static_cast<size_t>(cloud.size()));
      for (int i = 0; i < cloud.size(); ++i) eval_points[static_cast<size_t>(i)] = i;
    }

    for (const MethodSpec& method : methods) {
      std::vector<PointEval> evals(eval_points.size());
      const auto start = std::chrono::steady_clock::now();
      parallel_for(static_cast<int>(eval_points.size()), options.threads, [&](int i) {
        evals[static_cast<size_t>(i)] = evaluate_point(
            index, eval_points[static_cast<size_t>(i)], method, options.fit, net);
      });
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start;

      Accumulator& a = acc[method.label][entry.category];
      a.seconds += elapsed.count();
      a.points += static_cast<int64_t>(evals.size());
      for (const PointEval& e : evals) {
        a.angles.push_back(e.angle_deg);
        if (e.dk1 >= 0.0) {
          a.dk1.push_back(e.dk1);
          a.dk2.push_back(e.dk2);
        }
      }

      if (!options.dump_dir.empty()) {
        std::filesystem::create_directories(options.dump_dir);
        const auto dump = options.dump_dir /
                          (entry.basepath.filename().string() + "." +
                           sanitize(method.label) + ".angle_err");
        std::FILE* out = std::fopen(dump.string().c_str(), "w");
        if (out == nullptr) throw IoError("cannot write " + dump.string());
        for (const PointEval& e : evals) std::fprintf(out, "%.17g\n", e.angle_deg);
        std::fclose(out);
      }
    }
  }

  EvalReport report;
  const std::vector<double> grid = default_pgp_grid();
  for (auto& [label, categories] : acc)
    for (auto& [category, a] : categories) {
      CategoryStats stats;
      stats.rmse_deg = rmse(a.angles);
      stats.pgp_alpha = grid;
      stats.pgp_value = pgp(a.angles, grid);
      if (!a.dk1.empty()) {
        stats.dk1_rms = rmse(a.dk1);
        stats.dk2_rms = rmse(a.dk2);
      }
      stats.ms_per_point = 1000.0 * a.seconds / static_cast<double>(a.points);
      stats.point_count = a.points;
      report.results[label][category] = std::move(stats);
    }
  return report;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "jetfit-eval-report/1";
  j["config"] = config_echo;
  nlohmann::ordered_json methods;
  for (const auto& [label, categories] : results) {
    nlohmann::ordered_json cats;
    for (const auto& [category, s] : categories) {
      nlohmann::ordered_json c;
      c["rmse_deg"] = s.rmse_deg;
      c["pgp_alpha_deg"] = s.pgp_alpha;
      c["pgp_fraction"] = s.pgp_value;
      if (s.dk1_rms >= 0.0) {
        c["dk1_rms"] = s.dk1_rms;
        c["dk2_rms"] = s.dk2_rms;
      }
      c["ms_per_point"] = s.ms_per_point;
      c["point_count"] = s.point_count;
      cats[category] = std::move(c);
    }
    methods[label] = std::move(cats);
  }
  j["methods"] = std::move(methods);
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "jetfit-eval-report/1")
    throw FormatError("unrecognized evaluation report schema");
  EvalReport report;
  report.config_echo = j.value("config", nlohmann::json::object());
  for (const auto& [label, cats] : j.at("methods").items())
    for (const auto& [category, c] : cats.items()) {
      CategoryStats s;
      s.rmse_deg = c.at("rmse_deg");
      s.pgp_alpha = c.at("pgp_alpha_deg").get<std::vector<double>>();
      s.pgp_value = c.at("pgp_fraction").get<std::vector<double>>();
      s.dk1_rms = c.value("dk1_rms", -1.0);
      s.dk2_rms = c.value("dk2_rms", -1.0);
      s.ms_per_point = c.at("ms_per_point");
      s.point_count = c.at("point_count");
      report.results[label][category] = std::move(s);
    }
  return report;
}

std::string EvalReport::human_table() const {
  std::vector<std::string> categories;
  for (const auto& [label, cats] : results)
    for (const auto& [category, s] : cats)
      if (std::find(categories.begin(), categories.end(), category) == categories.end())
        categories.push_back(category);
  std::sort(categories.begin(), categories.end());

  std::ostringstream out;
  out << "angle RMSE (degrees)\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-18s", "category");
  out << buf;
  for (const auto& [label, cats] : results) {
    std::snprintf(buf, sizeof(buf), " %12s", label.c_str());
    out << buf;
  }
  out << '\n';
  for (const std::string& category : categories) {
    std::snprintf(buf, sizeof(buf), "%-18s", category.c_str());
    out << buf;
    for (const auto& [label, cats] : results) {
      const auto it = cats.find(category);
      if (it == cats.end())
        std::snprintf(buf, sizeof(buf), " %12s", "-");
      else
        std::snprintf(buf, sizeof(buf), " %12.3f", it->second.rmse_deg);
      out << buf;
    }
    out << '\n';
  }

  bool any_curv = false;
  for (const auto& [label, cats] : results)
    for (const auto& [category, s] : cats) any_curv = any_curv || s.dk1_rms >= 0.0;
  if (any_curv) {
    out << "\nnormalized curvature RMS (Dk1 / Dk2)\n";
    std::snprintf(buf, sizeof(buf), "%-18s", "category");
    out << buf;
    for (const auto& [label, cats] : results) {
      std::snprintf(buf, sizeof(buf), " %17s", label.c_str());
      out << buf;
    }
    out << '\n';
    for (const std::string& category : categories) {
      std::snprintf(buf, sizeof(buf), "%-18s", category.c_str());
      out << buf;
      for (const auto& [label, cats] : results) {
        const auto it = cats.find(category);
        if (it == cats.end() || it->second.dk1_rms < 0.0) {
          std::snprintf(buf, sizeof(buf), " %17s", "-");
        } else {
          char cell[32];
          std::snprintf(cell, sizeof(cell), "%.3f / %.3f", it->second.dk1_rms,
                        it->second.dk2_rms);
          std::snprintf(buf, sizeof(buf), " %17s", cell);
        }
        out << buf;
      }
      out << '\n';
    }
  }
  return out.str();
}

CloudFitOutput fit_cloud(const PointCloud& cloud, const FitConfig& config,
                         const WeightNetParams* net, int threads) {
  const NeighborIndex index(cloud);
  const int n = cloud.size();
  std::vector<FitResult> fits(static_cast<size_t>(n));
  parallel_for(n, threads, [&](int i) {
    fits[static_cast<size_t>(i)] = fit_point(index, i, config, net);
  });

  CloudFitOutput out;
  out.normals.resize(n, 3);
  out.curvatures.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const FitResult& fit = fits[static_cast<size_t>(i)];
    out.normals.row(i) = fit.normal.transpose();
    out.curvatures(i, 0) = std::max(fit.k1, fit.k2);
    out.curvatures(i, 1) = std::min(fit.k1, fit.k2);
  }
  out.summed_weights = aggregate_weights(n, fits);
  return out;
}

}  // namespace jetfit
