#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "jetfit/augment.hpp"
#include "jetfit/checkpoint.hpp"
#include "jetfit/evaluate.hpp"
#include "jetfit/manifest.hpp"
#include "jetfit/pcpnet_io.hpp"
#include "jetfit/shapes.hpp"
#include "jetfit/train.hpp"

namespace fs = std::filesystem;
using namespace jetfit;

namespace {

// Relative inputs fall back to $JETFIT_DATA_ROOT when they do not resolve in
// the working directory.
fs::path resolve_input(const fs::path& path, const char* ext = nullptr) {
  auto probe = [&](const fs::path& p) {
    return ext != nullptr ? fs::exists(fs::path(p).concat(ext)) : fs::exists(p);
  };
  if (probe(path) || path.is_absolute()) return path;
  if (const char* root = std::getenv("JETFIT_DATA_ROOT"); root != nullptr) {
    const fs::path candidate = fs::path(root) / path;
    if (probe(candidate)) return candidate;
  }
  return path;
}

void write_column(const fs::path& file, const Eigen::VectorXd& values) {
  std::FILE* out = std::fopen(file.string().c_str(), "w");
  if (out == nullptr) throw IoError("cannot write " + file.string());
  for (Eigen::Index i = 0; i < values.size(); ++i)
    std::fprintf(out, "%.17g\n", values[i]);
  std::fclose(out);
}

void write_matrix(const fs::path& file, const Eigen::MatrixXd& values) {
  std::FILE* out = std::fopen(file.string().c_str(), "w");
  if (out == nullptr) throw IoError("cannot write " + file.string());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      std::fprintf(out, j == 0 ? "%.17g" : " %.17g", values(i, j));
    std::fputc('\n', out);
  }
  std::fclose(out);
}

struct SynthOptions {
  std::string kind = "sphere";
  int count = 10000;
  uint64_t seed = 0;
  double radius = 1.0;
  double minor_radius = 0.25;
  double coeff = 1.0;
  double extent = 2.0;
  double noise = 0.0;
  uint64_t noise_seed = 1;
  std::string density = "none";
  double keep_min = 0.3, keep_max = 1.0;
  int bands = 8;
  double removed_fraction = 0.3;
  int eval_count = 0;
  std::string out;
};

int cmd_synth(const SynthOptions& opt, const std::vector<std::string>& args) {
  RunManifest manifest;
  manifest.command = "synth";
  manifest.args = args;
  manifest.started_at = iso8601_now();

  ShapeSpec spec;
  spec.kind = parse_shape_kind(opt.kind);
  spec.sample_count = opt.count;
  spec.seed = opt.seed;
  spec.radius = opt.radius;
  spec.minor_radius = opt.minor_radius;
  spec.coeff = opt.coeff;
  spec.extent = opt.extent;

  PointCloud cloud = generate_shape(spec);
  if (opt.noise > 0.0) cloud = add_gaussian_noise(cloud, opt.noise, opt.noise_seed);
  if (opt.density != "none") {
    DensityParams dp;
    dp.keep_min = opt.keep_min;
    dp.keep_max = opt.keep_max;
    dp.bands = opt.bands;
    dp.removed_fraction = opt.removed_fraction;
    const DensityKind kind =
        opt.density == "gradient" ? DensityKind::kGradient : DensityKind::kStripes;
    cloud = subsample_density(cloud, kind, dp, opt.noise_seed + 1);
  }
  if (opt.eval_count > 0) {
    const int n_eval = std::min(opt.eval_count, cloud.size());
    std::vector<int> all(static_cast<size_t>(cloud.size()));
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 gen(spec.seed + 0x65766121ULL);
    std::shuffle(all.begin(), all.end(), gen);
    all.resize(static_cast<size_t>(n_eval));
    std::sort(all.begin(), all.end());
    cloud.eval_indices = std::move(all);
  }

  const fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_pcpnet(cloud, out);

  nlohmann::ordered_json config;
  config["kind"] = opt.kind;
  config["count"] = opt.count;
  config["seed"] = opt.seed;
  config["radius"] = opt.radius;
  config["minor_radius"] = opt.minor_radius;
  config["coeff"] = opt.coeff;
  config["extent"] = opt.extent;
  config["noise"] = opt.noise;
  config["noise_seed"] = opt.noise_seed;
  config["density"] = opt.density;
  config["eval_count"] = opt.eval_count;
  manifest.config = config;
  manifest.finished_at = iso8601_now();
  manifest.write(fs::path(opt.out + ".manifest.json"));
  std::cout << "wrote " << cloud.size() << " points to " << opt.out << ".xyz\n";
  return 0;
}

struct FitOptions {
  std::string input;
  std::string checkpoint;
  int k = 256;
  int order = 3;
  double ridge = 1e-8;
  bool uniform_weights = false;
  std::string out;
  int threads = 0;
};

int cmd_fit(const FitOptions& opt, const std::vector<std::string>& args) {
  if (!opt.uniform_weights && opt.checkpoint.empty())
    throw UsageError("fit: provide --checkpoint or pass --uniform-weights");

  RunManifest manifest;
  manifest.command = "fit";
  manifest.args = args;
  manifest.started_at = iso8601_now();

  const fs::path input = resolve_input(opt.input, ".xyz");
  const PointCloud cloud = load_pcpnet(input);
  manifest.add_input(fs::path(input).concat(".xyz"));

  std::optional<WeightNetParams> net;
  if (!opt.uniform_weights) {
    const fs::path ck = resolve_input(opt.checkpoint);
    net = params_from_checkpoint(read_checkpoint(ck));
    manifest.add_input(ck);
  }

  FitConfig config;
  config.k_neighbors = opt.k;
  config.jet_order = opt.order;
  config.ridge = opt.ridge;
  config.uniform_weights = opt.uniform_weights;
  const int threads =
      opt.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : opt.threads;
  const CloudFitOutput result = fit_cloud(cloud, config, net ? &*net : nullptr, threads);

  const fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_matrix(fs::path(opt.out + ".normals"), result.normals);
  write_matrix(fs::path(opt.out + ".curv"), result.curvatures);
  write_column(fs::path(opt.out + ".weights"), result.summed_weights);

  nlohmann::ordered_json config_json;
  config_json["k"] = opt.k;
  config_json["order"] = opt.order;
  config_json["ridge"] = opt.ridge;
  config_json["uniform_weights"] = opt.uniform_weights;
  config_json["threads"] = threads;
  manifest.config = config_json;
  manifest.finished_at = iso8601_now();
  manifest.write(fs::path(opt.out + ".manifest.json"));
  std::cout << "fit " << cloud.size() << " points from " << opt.input << '\n';
  return 0;
}

struct TrainCliOptions {
  std::string config_path;
  std::string shapes_manifest;
  std::string out = "train_out";
  // optional overrides; negative / empty means "not provided"
  std::optional<int> epochs, batch_size, samples, k, order, threads;
  std::optional<double> lr, alpha1, alpha2, ridge, epsilon;
  std::optional<uint64_t> seed;
  std::optional<std::string> resume;
  bool no_log_term = false;
  std::optional<int> net_local, net_mid, net_global;
  std::optional<std::string> net_head;
};

int cmd_train(const TrainCliOptions& opt, const std::vector<std::string>& args) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.args = args;
  manifest.started_at = iso8601_now();

  TrainConfig config;
  std::string shapes_manifest = opt.shapes_manifest;
  if (!opt.config_path.empty()) {
    const fs::path path = resolve_input(opt.config_path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    config = train_config_from_json(j);
    if (shapes_manifest.empty()) shapes_manifest = j.value("shapes", "");
    manifest.add_input(path);
  }
  if (shapes_manifest.empty())
    throw UsageError("train: provide --shapes or a config file with a 'shapes' key");

  // Command-line flags override config-file values.
  if (opt.epochs) config.epochs = *opt.epochs;
  if (opt.batch_size) config.batch_size = *opt.batch_size;
  if (opt.samples) config.samples_per_epoch = *opt.samples;
  if (opt.k) config.k_neighbors = *opt.k;
  if (opt.order) config.jet_order = *opt.order;
  if (opt.threads) config.threads = *opt.threads;
  if (opt.lr) config.learning_rate = *opt.lr;
  if (opt.alpha1) config.alpha1 = *opt.alpha1;
  if (opt.alpha2) config.alpha2 = *opt.alpha2;
  if (opt.ridge) config.ridge = *opt.ridge;
  if (opt.epsilon) config.epsilon = *opt.epsilon;
  if (opt.seed) config.seed = *opt.seed;
  if (opt.resume) config.resume = *opt.resume;
  if (opt.no_log_term) config.consistency_log_term = false;
  if (opt.net_local) config.net.local_width = *opt.net_local;
  if (opt.net_mid) config.net.mid_width = *opt.net_mid;
  if (opt.net_global) config.net.global_width = *opt.net_global;
  if (opt.net_head) {
    std::array<int, 3> widths{};
    if (std::sscanf(opt.net_head->c_str(), "%d,%d,%d", &widths[0], &widths[1],
                    &widths[2]) != 3)
      throw UsageError("train: --net-head expects three comma-separated widths");
    config.net.head_widths = widths;
  }

  const fs::path manifest_path = resolve_input(shapes_manifest);
  const auto entries = load_shape_manifest(manifest_path);
  manifest.add_input(manifest_path);
  std::vector<PointCloud> shapes;
  shapes.reserve(entries.size());
  for (const auto& entry : entries) {
    shapes.push_back(load_pcpnet(entry.basepath));
    manifest.add_input(fs::path(entry.basepath).concat(".xyz"));
  }

  const fs::path outdir(opt.out);
  fs::create_directories(outdir);
  const TrainResult result = train(config, shapes, outdir, &std::cout);

  manifest.config = train_config_to_json(config);
  manifest.config["shapes"] = shapes_manifest;
  manifest.finished_at = iso8601_now();
  manifest.write(outdir / "manifest.json");
  std::cout << "best epoch " << result.best_epoch << " val_rmse "
            << result.best_val_rmse_deg << " -> " << result.best_checkpoint.string()
            << '\n';
  return 0;
}

struct EvalOptions {
  std::string manifest_path;
  std::string methods = "jet";
  std::string checkpoint;
  int k = 256;
  int order = 3;
  double ridge = 1e-8;
  std::string out = "eval_out";
  int threads = 0;
  bool dump_errors = false;
};

int cmd_eval(const EvalOptions& opt, const std::vector<std::string>& args) {
  RunManifest manifest;
  manifest.command = "eval";
  manifest.args = args;
  manifest.started_at = iso8601_now();

  const fs::path manifest_file = resolve_input(opt.manifest_path);
  const auto entries = load_shape_manifest(manifest_file);
  manifest.add_input(manifest_file);

  std::vector<MethodSpec> methods;
  std::stringstream ss(opt.methods);
  std::string token;
  while (std::getline(ss, token, ','))
    if (!token.empty()) methods.push_back(parse_method(token));
  if (methods.empty()) throw UsageError("eval: no methods given");

  std::optional<WeightNetParams> net;
  bool needs_net = false;
  for (const auto& m : methods) needs_net = needs_net || m.kind == MethodSpec::Kind::kNeural;
  if (needs_net) {
    if (opt.checkpoint.empty()) throw UsageError("eval: method 'neural' requires --checkpoint");
    const fs::path ck = resolve_input(opt.checkpoint);
    net = params_from_checkpoint(read_checkpoint(ck));
    manifest.add_input(ck);
  }

  BenchmarkOptions options;
  options.fit.k_neighbors = opt.k;
  options.fit.jet_order = opt.order;
  options.fit.ridge = opt.ridge;
  options.threads =
      opt.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : opt.threads;
  const fs::path outdir(opt.out);
  fs::create_directories(outdir);
  if (opt.dump_errors) options.dump_dir = outdir / "errors";

  EvalReport report = run_benchmark(entries, methods, options, net ? &*net : nullptr);
  nlohmann::ordered_json config_json;
  config_json["methods"] = opt.methods;
  config_json["k"] = opt.k;
  config_json["order"] = opt.order;
  config_json["ridge"] = opt.ridge;
  config_json["threads"] = options.threads;
  report.config_echo = config_json;

  std::ofstream json_out(outdir / "report.json");
  json_out << report.to_json().dump(2) << '\n';
  std::cout << report.human_table();

  manifest.config = config_json;
  manifest.finished_at = iso8601_now();
  manifest.write(outdir / "manifest.json");
  return 0;
}

struct DenoiseOptions {
  std::string input;
  std::string checkpoint;
  int k = 256;
  int order = 3;
  double ridge = 1e-8;
  std::string out;
  int threads = 0;
};

int cmd_denoise(const DenoiseOptions& opt, const std::vector<std::string>& args) {
  RunManifest manifest;
  manifest.command = "denoise";
  manifest.args = args;
  manifest.started_at = iso8601_now();

  const fs::path input = resolve_input(opt.input, ".xyz");
  const PointCloud cloud = load_pcpnet(input);
  manifest.add_input(fs::path(input).concat(".xyz"));
  const fs::path ck = resolve_input(opt.checkpoint);
  const WeightNetParams net = params_from_checkpoint(read_checkpoint(ck));
  manifest.add_input(ck);

  FitConfig config;
  config.k_neighbors = opt.k;
  config.jet_order = opt.order;
  config.ridge = opt.ridge;
  const int threads =
      opt.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : opt.threads;
  const CloudFitOutput fits = fit_cloud(cloud, config, &net, threads);
  const PointCloud filtered = denoise(cloud, fits.summed_weights);

  const fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_pcpnet(filtered, out);
  write_column(fs::path(opt.out + ".weights"), fits.summed_weights);

  nlohmann::ordered_json config_json;
  config_json["k"] = opt.k;
  config_json["order"] = opt.order;
  config_json["ridge"] = opt.ridge;
  config_json["threads"] = threads;
  manifest.config = config_json;
  manifest.finished_at = iso8601_now();
  manifest.write(fs::path(opt.out + ".manifest.json"));
  std::cout << "kept " << filtered.size() << " of " << cloud.size() << " points\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-weighted least-squares jet fitting for 3D point clouds"};
  app.require_subcommand(1);
  std::vector<std::string> raw_args(argv + 1, argv + argc);

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate an analytic shape");
  synth_cmd->add_option("--kind", synth.kind,
                        "plane|sphere|cylinder|paraboloid|saddle|torus");
  synth_cmd->add_option("--count", synth.count, "number of sample points");
  synth_cmd->add_option("--seed", synth.seed, "sampling seed");
  synth_cmd->add_option("--radius", synth.radius, "sphere/cylinder/torus ring radius");
  synth_cmd->add_option("--minor-radius", synth.minor_radius, "torus tube radius");
  synth_cmd->add_option("--coeff", synth.coeff, "paraboloid/saddle coefficient");
  synth_cmd->add_option("--extent", synth.extent, "plane side / cylinder height");
  synth_cmd->add_option("--noise", synth.noise, "Gaussian sigma as bbox fraction");
  synth_cmd->add_option("--noise-seed", synth.noise_seed, "noise seed");
  synth_cmd->add_option("--density", synth.density, "none|gradient|stripes");
  synth_cmd->add_option("--keep-min", synth.keep_min, "gradient keep at the low end");
  synth_cmd->add_option("--keep-max", synth.keep_max, "gradient keep at the high end");
  synth_cmd->add_option("--bands", synth.bands, "stripe band count");
  synth_cmd->add_option("--removed-fraction", synth.removed_fraction,
                        "stripe fraction removed per period");
  synth_cmd->add_option("--eval-count", synth.eval_count,
                        "emit a .pidx evaluation subset of this size");
  synth_cmd->add_option("--out", synth.out, "output basepath")->required();

  FitOptions fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate normals and curvatures");
  fit_cmd->add_option("--input", fit.input, "input basepath (.xyz sibling set)")
      ->required();
  fit_cmd->add_option("--checkpoint", fit.checkpoint, "trained network checkpoint");
  fit_cmd->add_option("--k", fit.k, "neighborhood size");
  fit_cmd->add_option("--order", fit.order, "jet order (1-4)");
  fit_cmd->add_option("--ridge", fit.ridge, "ridge added to the normal matrix");
  fit_cmd->add_flag("--uniform-weights", fit.uniform_weights,
                    "classical unweighted jet fit (no network)");
  fit_cmd->add_option("--out", fit.out, "output basepath")->required();
  fit_cmd->add_option("--threads", fit.threads, "worker threads (0 = all cores)");

  TrainCliOptions traincli;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the weight network");
  train_cmd->add_option("--config", traincli.config_path, "JSON config file");
  train_cmd->add_option("--shapes", traincli.shapes_manifest,
                        "shape manifest (one basepath per line)");
  train_cmd->add_option("--out", traincli.out, "output directory");
  train_cmd->add_option("--epochs", traincli.epochs);
  train_cmd->add_option("--batch-size", traincli.batch_size);
  train_cmd->add_option("--samples-per-epoch", traincli.samples);
  train_cmd->add_option("--k", traincli.k);
  train_cmd->add_option("--order", traincli.order);
  train_cmd->add_option("--threads", traincli.threads, "1 = bitwise deterministic");
  train_cmd->add_option("--lr", traincli.lr);
  train_cmd->add_option("--alpha1", traincli.alpha1);
  train_cmd->add_option("--alpha2", traincli.alpha2);
  train_cmd->add_option("--ridge", traincli.ridge);
  train_cmd->add_option("--epsilon", traincli.epsilon);
  train_cmd->add_option("--seed", traincli.seed);
  train_cmd->add_option("--resume", traincli.resume, "checkpoint to continue from");
  train_cmd->add_flag("--no-log-term", traincli.no_log_term,
                      "drop the -log(w) barrier from the consistency loss");
  train_cmd->add_option("--net-local", traincli.net_local, "encoder local width");
  train_cmd->add_option("--net-mid", traincli.net_mid, "encoder mid width");
  train_cmd->add_option("--net-global", traincli.net_global, "encoder global width");
  train_cmd->add_option("--net-head", traincli.net_head, "head widths, e.g. 512,256,128");

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Benchmark methods over a manifest");
  eval_cmd->add_option("--manifest", eval.manifest_path, "shape manifest")->required();
  eval_cmd->add_option("--methods", eval.methods,
                       "comma list of neural|jet|pca, optional @k (jet@122)");
  eval_cmd->add_option("--checkpoint", eval.checkpoint);
  eval_cmd->add_option("--k", eval.k);
  eval_cmd->add_option("--order", eval.order);
  eval_cmd->add_option("--ridge", eval.ridge);
  eval_cmd->add_option("--out", eval.out, "report directory");
  eval_cmd->add_option("--threads", eval.threads);
  eval_cmd->add_flag("--dump-errors", eval.dump_errors, "write per-point error files");

  DenoiseOptions denoise_opt;
  CLI::App* denoise_cmd =
      app.add_subcommand("denoise", "Remove low-confidence points by summed weight");
  denoise_cmd->add_option("--input", denoise_opt.input)->required();
  denoise_cmd->add_option("--checkpoint", denoise_opt.checkpoint)->required();
  denoise_cmd->add_option("--k", denoise_opt.k);
  denoise_cmd->add_option("--order", denoise_opt.order);
  denoise_cmd->add_option("--ridge", denoise_opt.ridge);
  denoise_cmd->add_option("--out", denoise_opt.out)->required();
  denoise_cmd->add_option("--threads", denoise_opt.threads);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth, raw_args);
    if (fit_cmd->parsed()) return cmd_fit(fit, raw_args);
    if (train_cmd->parsed()) return cmd_train(traincli, raw_args);
    if (eval_cmd->parsed()) return cmd_eval(eval, raw_args);
    if (denoise_cmd->parsed()) return cmd_denoise(denoise_opt, raw_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
