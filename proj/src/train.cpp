#include "jetfit/train.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_set>

#include "jetfit/evaluate.hpp"
#include "jetfit/metrics.hpp"
#include "jetfit/pipeline.hpp"

namespace jetfit {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidInput("train: batch_size must be positive");
  if (learning_rate <= 0.0) throw InvalidInput("train: learning_rate must be positive");
  if (epochs < 1) throw InvalidInput("train: epochs must be positive");
  if (samples_per_epoch < 1)
    throw InvalidInput("train: samples_per_epoch must be positive");
  if (k_neighbors < 3) throw InvalidInput("train: k_neighbors must be at least 3");
  JetOrder probe(jet_order);
  if (alpha1 < 0.0 || alpha2 < 0.0)
    throw InvalidInput("train: loss weights must be non-negative");
  if (ridge < 0.0) throw InvalidInput("train: ridge must be non-negative");
  if (!(epsilon > 0.0)) throw InvalidInput("train: epsilon must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw InvalidInput("train: val_fraction must be in [0, 1)");
  if (threads < 0) throw InvalidInput("train: threads must be non-negative");
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["samples_per_epoch"] = c.samples_per_epoch;
  j["k_neighbors"] = c.k_neighbors;
  j["jet_order"] = c.jet_order;
  j["seed"] = c.seed;
  j["alpha1"] = c.alpha1;
  j["alpha2"] = c.alpha2;
  j["ridge"] = c.ridge;
  j["epsilon"] = c.epsilon;
  j["net"] = net_config_to_json(c.net);
  j["consistency_log_term"] = c.consistency_log_term;
  j["val_fraction"] = c.val_fraction;
  j["threads"] = c.threads;
  if (!c.resume.empty()) j["resume"] = c.resume;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.samples_per_epoch = j.value("samples_per_epoch", c.samples_per_epoch);
  c.k_neighbors = j.value("k_neighbors", c.k_neighbors);
  c.jet_order = j.value("jet_order", c.jet_order);
  c.seed = j.value("seed", c.seed);
  c.alpha1 = j.value("alpha1", c.alpha1);
  c.alpha2 = j.value("alpha2", c.alpha2);
  c.ridge = j.value("ridge", c.ridge);
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("net")) c.net = net_config_from_json(j.at("net"));
  c.consistency_log_term = j.value("consistency_log_term", c.consistency_log_term);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.threads = j.value("threads", c.threads);
  c.resume = j.value("resume", c.resume);
  return c;
}

namespace {

struct SampleRef {
  int shape = 0;
  int point = 0;
};

uint64_t pack(const SampleRef& s) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(s.shape)) << 32) |
         static_cast<uint32_t>(s.point);
}

// Per-worker accumulation for one contiguous slice of a batch. Reducing the
// slices in index order keeps multi-threaded runs deterministic too.
struct SliceResult {
  GradientSet grads;
  std::vector<std::vector<std::pair<std::string, ad::NormStats>>> norm_stats;
  double total = 0.0, sin = 0.0, consistency = 0.0, reg = 0.0;
  double weight_sum = 0.0;
  int64_t weight_count = 0;
  int processed = 0;
  int skipped = 0;
};

struct ShapeData {
  const PointCloud* cloud = nullptr;
  std::unique_ptr<NeighborIndex> index;
};

Vec3 local_gt_normal(const Patch& patch, const Eigen::Vector3d& world_normal) {
  return patch.basis.transpose() * world_normal;
}

}  // namespace

TrainResult train(const TrainConfig& config_in, const std::vector<PointCloud>& shapes,
                  const std::filesystem::path& outdir, std::ostream* progress) {
  TrainConfig config = config_in;
  config.net.epsilon = config.epsilon;
  config.validate();
  if (shapes.empty()) throw InvalidInput("train: no training shapes");
  for (const PointCloud& shape : shapes) {
    if (!shape.gt_normals)
      throw InvalidInput("train: dataset provides no ground-truth normals");
    if (shape.size() < config.k_neighbors)
      throw InvalidInput("train: a shape has fewer points than k_neighbors");
  }
  std::filesystem::create_directories(outdir);

  const int threads = config.threads == 0
                          ? static_cast<int>(std::thread::hardware_concurrency())
                          : config.threads;

  std::vector<ShapeData> data(shapes.size());
  for (size_t s = 0; s < shapes.size(); ++s) {
    data[s].cloud = &shapes[s];
    data[s].index = std::make_unique<NeighborIndex>(shapes[s]);
  }

  WeightNetParams params = init_params(config.net, config.seed);
  AdamState adam = AdamState::zeros_like(params);
  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  int start_epoch = 1;
  if (!config.resume.empty()) {
    const CheckpointData ck = read_checkpoint(config.resume);
    params = params_from_checkpoint(ck);
    params.config.epsilon = config.epsilon;
    if (auto restored = adam_from_checkpoint(ck, params)) adam = std::move(*restored);
    if (ck.meta.contains("extra") && ck.meta["extra"].contains("epoch"))
      start_epoch = static_cast<int>(ck.meta["extra"]["epoch"]) + 1;
  }

  int64_t total_pairs = 0;
  for (const PointCloud& shape : shapes) total_pairs += shape.size();

  // Validation split, fixed for the whole run.
  std::mt19937_64 val_gen(config.seed ^ 0x76616c5f736574ULL);
  const int n_val = std::max(
      1, static_cast<int>(std::lround(config.val_fraction * config.samples_per_epoch)));
  if (n_val >= total_pairs)
    throw InvalidInput("train: the validation split would consume the whole dataset");
  std::vector<SampleRef> val_set;
  std::unordered_set<uint64_t> val_keys;
  while (static_cast<int>(val_set.size()) < n_val) {
    SampleRef s;
    s.shape = static_cast<int>(val_gen() % shapes.size());
    s.point = static_cast<int>(val_gen() % static_cast<uint64_t>(shapes[static_cast<size_t>(s.shape)].size()));
    if (val_keys.insert(pack(s)).second) val_set.push_back(s);
  }

  const LossWeights loss_weights{config.alpha1, config.alpha2};
  const JetOrder order(config.jet_order);

  auto run_sample = [&](const SampleRef& s, SliceResult& out) {
    const ShapeData& shape = data[static_cast<size_t>(s.shape)];
    try {
      const auto neighbors = shape.index->knn(s.point, config.k_neighbors);
      const Patch patch = normalize_patch(*shape.cloud, neighbors, s.point);
      const Vec3 gt_local = local_gt_normal(
          patch, shape.cloud->gt_normals->row(s.point).transpose());
      ad::Tape tape;
      const SampleLossGraph g =
          build_sample_loss(tape, params, patch.local_points, gt_local, order,
                            config.ridge, loss_weights, config.consistency_log_term,
                            NetMode::kTrain);
      tape.backward(g.total);
      out.grads.add_from_tape(tape, params);
      out.norm_stats.push_back(g.net.norm_stats);
      out.total += tape.val(g.total)(0, 0);
      out.sin += tape.val(g.sin_term)(0, 0);
      out.consistency += tape.val(g.consistency_term)(0, 0);
      out.reg += tape.val(g.reg_term)(0, 0);
      out.weight_sum += tape.val(g.net.weights).sum();
      out.weight_count += tape.val(g.net.weights).rows();
      out.processed += 1;
    } catch (const DegeneratePatch&) {
      out.skipped += 1;
    } catch (const SingularFit&) {
      out.skipped += 1;
    }
  };

  const std::filesystem::path metrics_path = outdir / "metrics.csv";
  const bool fresh_log =
      !std::filesystem::exists(metrics_path) || std::filesystem::file_size(metrics_path) == 0;
  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw IoError("cannot open metrics log: " + metrics_path.string());
  if (fresh_log)
    metrics << "epoch,total_loss,sin_loss,consistency_loss,reg_loss,val_rmse_deg,"
               "mean_weight,skipped_samples\n";

  TrainResult result;
  result.metrics_csv = metrics_path;
  result.best_checkpoint = outdir / "checkpoint.jfck";
  result.last_checkpoint = outdir / "last.jfck";
  result.best_val_rmse_deg = std::numeric_limits<double>::infinity();

  for (int epoch = start_epoch; epoch < start_epoch + config.epochs; ++epoch) {
    std::mt19937_64 gen(config.seed * 0x9e3779b97f4a7c15ULL +
                        static_cast<uint64_t>(epoch));
    std::vector<SampleRef> samples;
    samples.reserve(static_cast<size_t>(config.samples_per_epoch));
    while (static_cast<int>(samples.size()) < config.samples_per_epoch) {
      SampleRef s;
      s.shape = static_cast<int>(gen() % shapes.size());
      s.point = static_cast<int>(gen() % static_cast<uint64_t>(shapes[static_cast<size_t>(s.shape)].size()));
      if (!val_keys.contains(pack(s))) samples.push_back(s);
    }

    EpochLog log;
    log.epoch = epoch;
    int64_t processed = 0;
    double weight_sum = 0.0;
    int64_t weight_count = 0;

    for (size_t batch_start = 0; batch_start < samples.size();
         batch_start += static_cast<size_t>(config.batch_size)) {
      const int batch_n = static_cast<int>(std::min(
          static_cast<size_t>(config.batch_size), samples.size() - batch_start));
      const int workers = std::max(1, std::min(threads, batch_n));
      std::vector<SliceResult> slices(static_cast<size_t>(workers));
      for (auto& slice : slices) slice.grads = GradientSet::zeros_like(params);

      auto work = [&](int w) {
        const int lo = batch_n * w / workers;
        const int hi = batch_n * (w + 1) / workers;
        for (int i = lo; i < hi; ++i)
          run_sample(samples[batch_start + static_cast<size_t>(i)],
                     slices[static_cast<size_t>(w)]);
      };
      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
      }

      SliceResult batch = std::move(slices[0]);
      for (int w = 1; w < workers; ++w) {
        batch.grads.add(slices[static_cast<size_t>(w)].grads);
        for (auto& s : slices[static_cast<size_t>(w)].norm_stats)
          batch.norm_stats.push_back(std::move(s));
        batch.total += slices[static_cast<size_t>(w)].total;
        batch.sin += slices[static_cast<size_t>(w)].sin;
        batch.consistency += slices[static_cast<size_t>(w)].consistency;
        batch.reg += slices[static_cast<size_t>(w)].reg;
        batch.weight_sum += slices[static_cast<size_t>(w)].weight_sum;
        batch.weight_count += slices[static_cast<size_t>(w)].weight_count;
        batch.processed += slices[static_cast<size_t>(w)].processed;
        batch.skipped += slices[static_cast<size_t>(w)].skipped;
      }
      log.skipped_samples += batch.skipped;
      if (batch.processed == 0) continue;

      batch.grads.scale(1.0 / batch.processed);
      adam_step(params, batch.grads, adam, adam_config);
      update_running_stats(params, batch.norm_stats);

      log.total += batch.total;
      log.sin += batch.sin;
      log.consistency += batch.consistency;
      log.reg += batch.reg;
      weight_sum += batch.weight_sum;
      weight_count += batch.weight_count;
      processed += batch.processed;
    }

    if (processed > 0) {
      log.total /= static_cast<double>(processed);
      log.sin /= static_cast<double>(processed);
      log.consistency /= static_cast<double>(processed);
      log.reg /= static_cast<double>(processed);
    }
    log.mean_weight = weight_count > 0 ? weight_sum / static_cast<double>(weight_count) : 0.0;

    // Validation: angle RMSE through the inference path.
    std::vector<double> val_errors(val_set.size(), 0.0);
    std::vector<char> val_ok(val_set.size(), 0);
    parallel_for(static_cast<int>(val_set.size()), threads, [&](int i) {
      const SampleRef& s = val_set[static_cast<size_t>(i)];
      const ShapeData& shape = data[static_cast<size_t>(s.shape)];
      try {
        const auto neighbors = shape.index->knn(s.point, config.k_neighbors);
        const Patch patch = normalize_patch(*shape.cloud, neighbors, s.point);
        const Eigen::VectorXd w = forward(params, patch).weights;
        const Eigen::MatrixX2d pts2d = patch.local_points.leftCols<2>();
        const auto design = build_vandermonde(pts2d, order);
        const auto precond = make_preconditioner(pts2d, order);
        const auto jet =
            solve_wls(design, w, patch.local_points.col(2), precond, config.ridge);
        const Eigen::Vector3d est = denormalize_normal(patch, jet_normal(jet));
        val_errors[static_cast<size_t>(i)] = angle_error_unoriented_deg(
            est, shape.cloud->gt_normals->row(s.point).transpose());
        val_ok[static_cast<size_t>(i)] = 1;
      } catch (const Error&) {
        val_ok[static_cast<size_t>(i)] = 0;
      }
    });
    std::vector<double> kept;
    for (size_t i = 0; i < val_errors.size(); ++i)
      if (val_ok[i]) kept.push_back(val_errors[i]);
    log.val_rmse_deg = kept.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : rmse(kept);

    nlohmann::ordered_json extra;
    extra["epoch"] = epoch;
    extra["val_rmse_deg"] = log.val_rmse_deg;
    extra["train_config"] = train_config_to_json(config_in);
    save_checkpoint(result.last_checkpoint, params, &adam, extra);
    if (log.val_rmse_deg < result.best_val_rmse_deg) {
      result.best_val_rmse_deg = log.val_rmse_deg;
      result.best_epoch = epoch;
      save_checkpoint(result.best_checkpoint, params, &adam, extra);
    }

    metrics << log.epoch << ',' << log.total << ',' << log.sin << ','
            << log.consistency << ',' << log.reg << ',' << log.val_rmse_deg << ','
            << log.mean_weight << ',' << log.skipped_samples << '\n';
    metrics.flush();
    if (progress != nullptr)
      *progress << "epoch " << log.epoch << " loss " << log.total << " val_rmse "
                << log.val_rmse_deg << " mean_w " << log.mean_weight << '\n';
    result.log.push_back(log);
  }
  return result;
}

}  // namespace jetfit
