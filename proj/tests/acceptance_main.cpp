// Acceptance suite: each criterion prints one [PASS]/[FAIL]/[SKIP] line; the
// process exits nonzero when any selected criterion fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "jetfit/augment.hpp"
#include "jetfit/checkpoint.hpp"
#include "jetfit/evaluate.hpp"
#include "jetfit/losses.hpp"
#include "jetfit/metrics.hpp"
#include "jetfit/pcpnet_io.hpp"
#include "jetfit/pipeline.hpp"
#include "jetfit/shapes.hpp"
#include "jetfit/train.hpp"

using namespace jetfit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "jetfit_acceptance";
  fs::create_directories(dir);
  return dir;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: the weighted solver against a dense explicit-inverse oracle.
// ---------------------------------------------------------------------------
Outcome criterion_1() {
  const auto start = Clock::now();
  auto gen = rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const JetOrder order(1 + static_cast<int>(gen() % 4));
    const int n = order.coeff_count() +
                  static_cast<int>(gen() % static_cast<uint64_t>(64 - order.coeff_count() + 1));
    Eigen::MatrixX2d pts(n, 2);
    for (int i = 0; i < n; ++i)
      pts.row(i) << uniform(gen, -1.0, 1.0), uniform(gen, -1.0, 1.0);
    Eigen::VectorXd heights(n), weights(n);
    for (int i = 0; i < n; ++i) {
      heights[i] = uniform(gen, -1.0, 1.0);
      weights[i] = uniform(gen, 0.1, 1.0);
    }
    const auto design = build_vandermonde(pts, order);
    const auto precond = make_preconditioner(pts, order);
    const auto jet = solve_wls(design, weights, heights, precond, 0.0);

    const Eigen::MatrixXd mtwm =
        design.values.transpose() * weights.asDiagonal() * design.values;
    const Eigen::VectorXd oracle =
        mtwm.inverse() * (design.values.transpose() * weights.cwiseProduct(heights));
    worst = std::max(worst,
                     (jet.beta - oracle).norm() / std::max(1.0, oracle.norm()));
  }
  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = worst < 1e-8 && elapsed < 5.0;
  out.detail = "1000 instances, worst relative deviation " + format_double(worst) +
               ", " + format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 2: finite-difference check of every parameter gradient on the
// reduced network (k = 16, widths 8/8/32), per term and total.
// ---------------------------------------------------------------------------
struct FdHarness {
  WeightNetParams params;
  Eigen::MatrixX3d pts;
  Vec3 gt;
  JetOrder order{2};
  LossWeights lw{1.0, 0.1};
  int term = 0;  // 0 total, 1 sin, 2 consistency, 3 reg

  double eval() {
    ad::Tape tape;
    const SampleLossGraph g =
        build_sample_loss(tape, params, pts, gt, order, 1e-9, lw, true, NetMode::kTrain);
    switch (term) {
      case 1: return tape.val(g.sin_term)(0, 0);
      case 2: return tape.val(g.consistency_term)(0, 0);
      case 3: return tape.val(g.reg_term)(0, 0);
      default: return tape.val(g.total)(0, 0);
    }
  }

  // Central differences, step 1e-4, with a stencil-agreement guard that skips
  // windows crossing a rectifier or max-pool kink (where the oracle itself is
  // invalid). Returns the worst relative error over valid entries.
  double max_rel_error(int* skipped, int* total) {
    ad::Tape tape;
    const SampleLossGraph g =
        build_sample_loss(tape, params, pts, gt, order, 1e-9, lw, true, NetMode::kTrain);
    const ad::Var out = term == 1   ? g.sin_term
                        : term == 2 ? g.consistency_term
                        : term == 3 ? g.reg_term
                                    : g.total;
    tape.backward(out);

    const double h = 1e-4;
    double worst = 0.0;
    params.visit_trainable([&](const std::string&, Eigen::MatrixXd& t) {
      Eigen::MatrixXd ad_grad = tape.grad_of_param(&t);
      if (ad_grad.size() == 0) ad_grad = Eigen::MatrixXd::Zero(t.rows(), t.cols());
      for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
          const double saved = t(i, j);
          auto at = [&](double d) {
            t(i, j) = saved + d;
            const double v = eval();
            t(i, j) = saved;
            return v;
          };
          const double f1 = at(h), f_1 = at(-h), f2 = at(2 * h), f_2 = at(-2 * h);
          const double fd2 = (f1 - f_1) / (2 * h);
          const double fd4 = (-f2 + 8 * f1 - 8 * f_1 + f_2) / (12 * h);
          ++*total;
          const double gap =
              std::abs(fd4 - fd2) / std::max({1e-4, std::abs(fd4), std::abs(fd2)});
          if (gap > 1e-3) {
            ++*skipped;
            continue;
          }
          const double denom = std::max({1e-4, std::abs(fd4), std::abs(ad_grad(i, j))});
          worst = std::max(worst, std::abs(fd4 - ad_grad(i, j)) / denom);
        }
    });
    return worst;
  }
};

Outcome criterion_2() {
  const auto start = Clock::now();
  auto gen = rng(1002);

  WeightNetConfig config;
  config.local_width = 8;
  config.mid_width = 8;
  config.global_width = 32;
  config.head_widths = {16, 8, 4};

  FdHarness harness;
  harness.params = init_params(config, 7);
  // Fresh parameters put the alignment transforms exactly on the |I - AA^T|
  // kink; nudge to a generic smooth point first.
  harness.params.visit_trainable([&gen](const std::string&, Eigen::MatrixXd& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) += uniform(gen, -0.05, 0.05);
  });
  harness.pts.resize(16, 3);
  harness.pts.row(0).setZero();
  for (int i = 1; i < 16; ++i) {
    const double x = uniform(gen, -0.7, 0.7), y = uniform(gen, -0.7, 0.7);
    harness.pts.row(i) << x, y, 0.5 * x * x - 0.2 * x * y + uniform(gen, -0.05, 0.05);
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::Vector3d gt(nd(gen), nd(gen), nd(gen));
  harness.gt = gt.normalized();

  double worst = 0.0;
  int skipped = 0, total = 0;
  for (const int term : {1, 2, 3, 0}) {
    harness.term = term;
    worst = std::max(worst, harness.max_rel_error(&skipped, &total));
  }
  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = worst < 1e-4 && elapsed < 120.0 && skipped < total / 50;
  out.detail = "max relative error " + format_double(worst) + " over " +
               std::to_string(total) + " entries (" + std::to_string(skipped) +
               " kink windows skipped), " + format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 3: exact-surface recovery (planes, paraboloid, spheres).
// ---------------------------------------------------------------------------
Outcome criterion_3() {
  const auto start = Clock::now();
  auto gen = rng(1003);
  std::ostringstream detail;
  bool pass = true;

  {  // Noiseless plane patches: angle error below 1e-4 degrees.
    ShapeSpec spec;
    spec.kind = ShapeKind::kPlane;
    spec.sample_count = 4000;
    spec.seed = 31;
    Eigen::Matrix3d rot =
        Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 2).normalized()).toRotationMatrix();
    const PointCloud plane =
        transform_cloud(generate_shape(spec), rot, Eigen::Vector3d(0.3, -1.0, 2.0));
    const NeighborIndex index(plane);
    FitConfig config;
    config.k_neighbors = 64;
    config.jet_order = 3;
    config.ridge = 0.0;
    config.uniform_weights = true;
    double worst = 0.0;
    for (int q = 0; q < 50; ++q) {
      const int idx = static_cast<int>(gen() % static_cast<uint64_t>(plane.size()));
      const FitResult fit = fit_point(index, idx, config, nullptr);
      worst = std::max(worst, angle_error_unoriented_deg(
                                  fit.normal, plane.gt_normals->row(idx).transpose()));
    }
    pass = pass && worst < 1e-4;
    detail << "plane worst angle " << format_double(worst) << " deg";
  }

  {  // Noiseless paraboloid: curvature magnitudes within 1 percent.
    ShapeSpec spec;
    spec.kind = ShapeKind::kParaboloid;
    spec.coeff = 1.0;
    spec.extent = 2.0;
    spec.sample_count = 60000;
    spec.seed = 32;
    const PointCloud para = generate_shape(spec);
    const NeighborIndex index(para);
    FitConfig config;
    config.k_neighbors = 256;
    config.jet_order = 3;
    config.uniform_weights = true;
    double worst = 0.0;
    for (int q = 0; q < 40; ++q) {
      const int idx = static_cast<int>(gen() % static_cast<uint64_t>(para.size()));
      const FitResult fit = fit_point(index, idx, config, nullptr);
      const double est_k1 = std::max(std::abs(fit.k1), std::abs(fit.k2));
      const double est_k2 = std::min(std::abs(fit.k1), std::abs(fit.k2));
      const double gt_k1 = std::max(std::abs((*para.gt_curvatures)(idx, 0)),
                                    std::abs((*para.gt_curvatures)(idx, 1)));
      const double gt_k2 = std::min(std::abs((*para.gt_curvatures)(idx, 0)),
                                    std::abs((*para.gt_curvatures)(idx, 1)));
      worst = std::max(worst, std::abs(est_k1 - gt_k1) / gt_k1);
      worst = std::max(worst, std::abs(est_k2 - gt_k2) / gt_k2);
    }
    pass = pass && worst < 0.01;
    detail << "; paraboloid worst curvature dev " << format_double(100.0 * worst) << "%";
  }

  {  // Spheres at three radii, k = 256 dense sampling, within 2 percent.
    double worst = 0.0;
    for (const double radius : {0.5, 1.0, 2.0}) {
      ShapeSpec spec;
      spec.kind = ShapeKind::kSphere;
      spec.radius = radius;
      spec.sample_count = 60000;
      spec.seed = 33;
      const PointCloud sphere = generate_shape(spec);
      const NeighborIndex index(sphere);
      FitConfig config;
      config.k_neighbors = 256;
      config.jet_order = 3;
      config.uniform_weights = true;
      for (int q = 0; q < 25; ++q) {
        const int idx = static_cast<int>(gen() % static_cast<uint64_t>(sphere.size()));
        const FitResult fit = fit_point(index, idx, config, nullptr);
        const double want = 1.0 / radius;
        worst = std::max(worst, std::abs(std::abs(fit.k1) - want) / want);
        worst = std::max(worst, std::abs(std::abs(fit.k2) - want) / want);
      }
    }
    pass = pass && worst < 0.02;
    detail << "; sphere worst curvature dev " << format_double(100.0 * worst) << "%";
  }

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 60.0;
  Outcome out;
  out.pass = pass;
  out.detail = detail.str() + ", " + format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Shared corpora for the training criteria.
// ---------------------------------------------------------------------------
std::vector<ShapeSpec> mixed_shape_specs(uint64_t seed_base) {
  std::vector<ShapeSpec> specs;
  auto add = [&specs, &seed_base](ShapeKind kind, double radius, double minor,
                                  double coeff, double extent) {
    ShapeSpec s;
    s.kind = kind;
    s.radius = radius;
    s.minor_radius = minor;
    s.coeff = coeff;
    s.extent = extent;
    s.sample_count = 8000;
    s.seed = seed_base++;
    specs.push_back(s);
  };
  add(ShapeKind::kSphere, 0.4, 0.25, 1.0, 2.0);
  add(ShapeKind::kSphere, 0.7, 0.25, 1.0, 2.0);
  add(ShapeKind::kCylinder, 0.35, 0.25, 1.0, 1.5);
  add(ShapeKind::kParaboloid, 1.0, 0.25, 2.5, 1.6);
  add(ShapeKind::kSaddle, 1.0, 0.25, 2.0, 1.4);
  add(ShapeKind::kTorus, 0.9, 0.3, 1.0, 2.0);
  return specs;
}

std::vector<ShapeSpec> heldout_shape_specs(uint64_t seed_base) {
  std::vector<ShapeSpec> specs;
  auto add = [&specs, &seed_base](ShapeKind kind, double radius, double minor,
                                  double coeff, double extent) {
    ShapeSpec s;
    s.kind = kind;
    s.radius = radius;
    s.minor_radius = minor;
    s.coeff = coeff;
    s.extent = extent;
    s.sample_count = 8000;
    s.seed = seed_base++;
    specs.push_back(s);
  };
  add(ShapeKind::kSphere, 0.45, 0.25, 1.0, 2.0);
  add(ShapeKind::kCylinder, 0.4, 0.25, 1.0, 1.5);
  add(ShapeKind::kParaboloid, 1.0, 0.25, 2.2, 1.6);
  add(ShapeKind::kSaddle, 1.0, 0.25, 1.8, 1.4);
  add(ShapeKind::kTorus, 1.0, 0.28, 1.0, 2.0);
  return specs;
}

// Training corpus per the reference protocol: each shape appears clean and at
// the three noise magnitudes.
std::vector<PointCloud> noisy_training_corpus(uint64_t seed_base) {
  std::vector<PointCloud> shapes;
  uint64_t noise_seed = seed_base + 500;
  for (const ShapeSpec& spec : mixed_shape_specs(seed_base)) {
    const PointCloud clean = generate_shape(spec);
    shapes.push_back(clean);
    for (const double sigma : {0.00125, 0.006, 0.012})
      shapes.push_back(add_gaussian_noise(clean, sigma, noise_seed++));
  }
  return shapes;
}

std::vector<PointCloud> heldout_corpus(double sigma, uint64_t seed_base) {
  std::vector<PointCloud> shapes;
  uint64_t noise_seed = seed_base + 900;
  for (const ShapeSpec& spec : heldout_shape_specs(seed_base)) {
    PointCloud cloud = generate_shape(spec);
    if (sigma > 0.0) cloud = add_gaussian_noise(cloud, sigma, noise_seed++);
    shapes.push_back(std::move(cloud));
  }
  return shapes;
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.batch_size = 32;
  c.learning_rate = 1e-3;
  c.epochs = 12;
  c.samples_per_epoch = 2048;
  c.k_neighbors = 64;
  c.jet_order = 2;
  c.seed = 11;
  c.threads = 2;
  c.net.local_width = 16;
  c.net.mid_width = 32;
  c.net.global_width = 64;
  c.net.head_widths = {32, 16, 8};
  return c;
}

// Angle RMSE of a method over the evaluation subset of each shape.
double corpus_rmse(const std::vector<PointCloud>& shapes, const FitConfig& config,
                   const WeightNetParams* net, int queries_per_shape, uint64_t seed) {
  std::vector<double> errors;
  auto gen = rng(seed);
  for (const PointCloud& cloud : shapes) {
    const NeighborIndex index(cloud);
    std::vector<int> queries(static_cast<size_t>(queries_per_shape));
    for (int& q : queries) q = static_cast<int>(gen() % static_cast<uint64_t>(cloud.size()));
    std::vector<double> local(queries.size(), 0.0);
    parallel_for(static_cast<int>(queries.size()), 2, [&](int i) {
      const FitResult fit =
          fit_point(index, queries[static_cast<size_t>(i)], config, net);
      local[static_cast<size_t>(i)] = angle_error_unoriented_deg(
          fit.normal,
          cloud.gt_normals->row(queries[static_cast<size_t>(i)]).transpose());
    });
    errors.insert(errors.end(), local.begin(), local.end());
  }
  return rmse(errors);
}

// ---------------------------------------------------------------------------
// Criterion 4: the log barrier prevents weight collapse.
// ---------------------------------------------------------------------------
Outcome criterion_4() {
  const auto start = Clock::now();
  // 500 optimizer steps on the noisy corpus, with and without the barrier.
  const std::vector<PointCloud> shapes = noisy_training_corpus(4000);

  TrainConfig config = desk_train_config();
  config.batch_size = 16;
  config.samples_per_epoch = 800;   // 50 steps per epoch
  config.epochs = 10;               // 500 steps
  config.learning_rate = 5e-3;
  config.k_neighbors = 24;
  config.net.local_width = 8;
  config.net.mid_width = 8;
  config.net.global_width = 32;
  config.net.head_widths = {16, 8, 4};
  config.val_fraction = 0.02;

  TrainConfig ablated = config;
  ablated.consistency_log_term = false;

  const fs::path dir = work_dir();
  const TrainResult with_barrier = train(config, shapes, dir / "collapse_with");
  const TrainResult without_barrier = train(ablated, shapes, dir / "collapse_without");

  const double mean_with = with_barrier.log.back().mean_weight;
  const double mean_without = without_barrier.log.back().mean_weight;
  const double elapsed = seconds_since(start);

  Outcome out;
  out.pass = mean_without < 0.1 && mean_with > 0.25 && elapsed < 600.0;
  out.detail = "mean weight with barrier " + format_double(mean_with) +
               ", without " + format_double(mean_without) + ", " +
               format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 5: trained weights suppress injected off-surface outliers.
// ---------------------------------------------------------------------------
PointCloud corner_cloud(uint64_t seed, int points_per_face) {
  ShapeSpec spec;
  spec.kind = ShapeKind::kPlane;
  spec.extent = 1.2;
  spec.sample_count = points_per_face;
  spec.seed = seed;
  const PointCloud face_a = generate_shape(spec);
  spec.seed = seed + 1;
  PointCloud face_b = generate_shape(spec);
  // Stand the second face upright to form a right-angle corner.
  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(M_PI / 2.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
  face_b = transform_cloud(face_b, rot, Eigen::Vector3d(-0.6, 0.0, 0.6));
  PointCloud face_a_shift = face_a;
  face_a_shift.positions.col(0).array() += 0.0;
  return merge_clouds({face_a_shift, face_b});
}

Outcome criterion_5() {
  const auto start = Clock::now();
  const double noise = 0.006;

  std::vector<PointCloud> shapes;
  uint64_t noise_seed = 5100;
  for (uint64_t s = 0; s < 3; ++s) {
    const PointCloud corner = corner_cloud(5000 + 2 * s, 5000);
    shapes.push_back(add_gaussian_noise(corner, noise, noise_seed++));
    shapes.push_back(add_gaussian_noise(corner, 0.012, noise_seed++));
  }

  TrainConfig config = desk_train_config();
  config.k_neighbors = 48;
  config.epochs = 10;
  config.samples_per_epoch = 1536;
  const TrainResult result = train(config, shapes, work_dir() / "outliers");
  const WeightNetParams net =
      params_from_checkpoint(read_checkpoint(result.best_checkpoint));

  // Fresh corner cloud with tracked outliers pushed off the surface.
  PointCloud eval_cloud = add_gaussian_noise(corner_cloud(5900, 5000), noise, 991);
  auto gen = rng(5901);
  const int n = eval_cloud.size();
  std::vector<bool> is_outlier(static_cast<size_t>(n), false);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < n; i += 20) {  // 5 percent of points
    Eigen::Vector3d dir(nd(gen), nd(gen), nd(gen));
    dir.normalize();
    eval_cloud.positions.row(i) += (uniform(gen, 0.1, 0.25) * dir).transpose();
    is_outlier[static_cast<size_t>(i)] = true;
  }

  const NeighborIndex index(eval_cloud);
  double outlier_sum = 0.0, surface_sum = 0.0;
  int64_t outlier_count = 0, surface_count = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int q = static_cast<int>(gen() % static_cast<uint64_t>(n));
    if (is_outlier[static_cast<size_t>(q)]) continue;
    const auto neighbors = index.knn(q, config.k_neighbors);
    const Patch patch = normalize_patch(eval_cloud, neighbors, q);
    const Eigen::VectorXd w = forward(net, patch).weights;
    for (size_t j = 0; j < neighbors.size(); ++j) {
      if (is_outlier[static_cast<size_t>(neighbors[j])]) {
        outlier_sum += w[static_cast<Eigen::Index>(j)];
        ++outlier_count;
      } else {
        surface_sum += w[static_cast<Eigen::Index>(j)];
        ++surface_count;
      }
    }
  }
  const double mean_outlier =
      outlier_count > 0 ? outlier_sum / static_cast<double>(outlier_count) : 1.0;
  const double mean_surface = surface_sum / static_cast<double>(surface_count);
  const double elapsed = seconds_since(start);

  Outcome out;
  out.pass = outlier_count > 100 && mean_outlier <= 0.5 * mean_surface &&
             elapsed < 1800.0;
  out.detail = "mean outlier weight " + format_double(mean_outlier) +
               " vs surface " + format_double(mean_surface) + " (" +
               std::to_string(outlier_count) + " outlier draws), " +
               format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criteria 6 and 7 share one desk-scale training run on the mixed corpus.
// ---------------------------------------------------------------------------
const WeightNetParams& mixed_corpus_net() {
  static const WeightNetParams net = [] {
    const std::vector<PointCloud> shapes = noisy_training_corpus(6000);
    TrainConfig config = desk_train_config();
    const TrainResult result = train(config, shapes, work_dir() / "mixed");
    return params_from_checkpoint(read_checkpoint(result.best_checkpoint));
  }();
  return net;
}

Outcome criterion_6() {
  const auto start = Clock::now();
  const WeightNetParams& net = mixed_corpus_net();
  const std::vector<PointCloud> heldout = heldout_corpus(0.006, 6600);

  FitConfig config;
  config.k_neighbors = desk_train_config().k_neighbors;
  config.jet_order = desk_train_config().jet_order;

  FitConfig weighted = config;
  weighted.uniform_weights = false;
  FitConfig uniform = config;
  uniform.uniform_weights = true;

  const double rmse_net = corpus_rmse(heldout, weighted, &net, 200, 661);
  const double rmse_jet = corpus_rmse(heldout, uniform, nullptr, 200, 661);
  const double elapsed = seconds_since(start);

  Outcome out;
  out.pass = rmse_net <= 0.9 * rmse_jet && elapsed < 1800.0;
  out.detail = "weighted RMSE " + format_double(rmse_net) + " deg vs uniform " +
               format_double(rmse_jet) + " deg (ratio " +
               format_double(rmse_net / rmse_jet) + ") at k=" +
               std::to_string(config.k_neighbors) + ", " + format_double(elapsed) +
               " s";
  return out;
}

Outcome criterion_7() {
  const auto start = Clock::now();
  const WeightNetParams& net = mixed_corpus_net();
  const std::vector<PointCloud> clean = heldout_corpus(0.0, 7700);
  const std::vector<PointCloud> noisy = heldout_corpus(0.012, 7700);

  auto rmse_at = [&](const std::vector<PointCloud>& shapes, int k) {
    FitConfig config;
    config.k_neighbors = k;
    config.jet_order = desk_train_config().jet_order;
    return corpus_rmse(shapes, config, &net, 150, 771);
  };
  const double noisy_small = rmse_at(noisy, 64);
  const double noisy_large = rmse_at(noisy, 256);
  const double clean_small = rmse_at(clean, 64);
  const double clean_large = rmse_at(clean, 256);
  const double elapsed = seconds_since(start);

  Outcome out;
  out.pass = noisy_large < noisy_small &&
             std::abs(clean_large - clean_small) < 2.0 && elapsed < 1800.0;
  out.detail = "sigma 0.012: k64 " + format_double(noisy_small) + " -> k256 " +
               format_double(noisy_large) + " deg; clean: k64 " +
               format_double(clean_small) + " -> k256 " + format_double(clean_large) +
               " deg, " + format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 8: metric implementations against brute-force oracles.
// ---------------------------------------------------------------------------
Outcome criterion_8() {
  const auto start = Clock::now();
  auto gen = rng(1008);
  bool pass = true;
  int cases = 0;

  for (int trial = 0; trial < 2500 && pass; ++trial, ++cases) {
    const int n = 1 + static_cast<int>(gen() % 12);
    std::vector<double> errors(static_cast<size_t>(n));
    for (double& e : errors) e = uniform(gen, 0.0, 90.0);
    double sq = 0.0;
    for (const double e : errors) sq += e * e;
    if (std::abs(rmse(errors) - std::sqrt(sq / n)) > 1e-12) pass = false;
  }

  for (int trial = 0; trial < 2500 && pass; ++trial, ++cases) {
    const int n = 1 + static_cast<int>(gen() % 12);
    std::vector<double> errors(static_cast<size_t>(n));
    for (double& e : errors) e = uniform(gen, 0.0, 40.0);
    const std::vector<double> grid{uniform(gen, 0.0, 40.0), uniform(gen, 0.0, 40.0)};
    const auto curve = pgp(errors, grid);
    for (size_t a = 0; a < grid.size(); ++a) {
      int good = 0;
      for (const double e : errors)
        if (e < grid[a]) ++good;
      if (curve[a] != static_cast<double>(good) / n) pass = false;
    }
  }

  for (int trial = 0; trial < 2500 && pass; ++trial, ++cases) {
    const double est = uniform(gen, -5.0, 5.0);
    const double gt = uniform(gen, -5.0, 5.0);
    const double expected = std::abs(est - gt) / std::max(std::abs(gt), 1.0);
    if (std::abs(curvature_error(est, gt) - expected) > 1e-15) pass = false;
  }

  for (int trial = 0; trial < 1250 && pass; ++trial, ++cases) {
    const int cloud_size = 5 + static_cast<int>(gen() % 30);
    const int fits_n = 1 + static_cast<int>(gen() % 8);
    std::vector<FitResult> fits(static_cast<size_t>(fits_n));
    std::vector<double> expected(static_cast<size_t>(cloud_size), 0.0);
    for (FitResult& fit : fits) {
      const int k = 1 + static_cast<int>(gen() % 6);
      fit.weights.resize(k);
      for (int j = 0; j < k; ++j) {
        const int idx = static_cast<int>(gen() % static_cast<uint64_t>(cloud_size));
        fit.neighbors.push_back(idx);
        fit.weights[j] = uniform(gen, 0.0, 2.0);
        expected[static_cast<size_t>(idx)] += fit.weights[j];
      }
    }
    const Eigen::VectorXd summed = aggregate_weights(cloud_size, fits);
    for (int i = 0; i < cloud_size; ++i)
      if (summed[i] != expected[static_cast<size_t>(i)]) pass = false;
  }

  for (int trial = 0; trial < 1250 && pass; ++trial, ++cases) {
    const int n = 3 + static_cast<int>(gen() % 30);
    PointCloud cloud;
    cloud.positions = Eigen::MatrixX3d::Random(n, 3);
    Eigen::VectorXd summed(n);
    for (int i = 0; i < n; ++i) summed[i] = uniform(gen, 0.0, 10.0);
    std::vector<int> kept;
    const PointCloud filtered = denoise(cloud, summed, &kept);
    // Brute-force recomputation of the mean - std rule.
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += summed[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (summed[i] - mean) * (summed[i] - mean);
    const double threshold = mean - std::sqrt(var / n);
    std::vector<int> expected;
    for (int i = 0; i < n; ++i)
      if (summed[i] >= threshold) expected.push_back(i);
    if (kept != expected || filtered.size() != static_cast<int>(expected.size()))
      pass = false;
  }

  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = pass && elapsed < 60.0;
  out.detail = std::to_string(cases) + " randomized cases, " + format_double(elapsed) +
               " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 9: bitwise-identical checkpoints from two CLI training runs.
// ---------------------------------------------------------------------------
std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing file: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome criterion_9() {
  const auto start = Clock::now();
  const char* cli = std::getenv("JETFIT_CLI");
  Outcome out;
  if (cli == nullptr) {
    out.skipped = true;
    out.detail = "JETFIT_CLI not set; run through ctest";
    return out;
  }
  const fs::path dir = work_dir() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto shell = [&dir](const std::string& cmd) {
    const std::string full = "cd " + dir.string() + " && " + cmd + " >/dev/null 2>&1";
    return std::system(full.c_str());
  };
  const std::string cli_s(cli);
  if (shell(cli_s + " synth --kind sphere --radius 0.8 --count 1500 --seed 12 "
                    "--noise 0.006 --out shape") != 0) {
    out.detail = "synthesis run failed";
    return out;
  }
  std::ofstream(dir / "shapes.txt") << "shape\n";
  const std::string train_cmd =
      cli_s + " train --shapes shapes.txt --epochs 3 --samples-per-epoch 96 "
              "--batch-size 16 --k 16 --order 2 --threads 1 --seed 5 "
              "--net-local 6 --net-mid 6 --net-global 12 --net-head 8,6,4 --out ";
  if (shell(train_cmd + "run_a") != 0 || shell(train_cmd + "run_b") != 0) {
    out.detail = "training run failed";
    return out;
  }
  const bool best_equal = read_bytes(dir / "run_a/checkpoint.jfck") ==
                          read_bytes(dir / "run_b/checkpoint.jfck");
  const bool last_equal =
      read_bytes(dir / "run_a/last.jfck") == read_bytes(dir / "run_b/last.jfck");
  const double elapsed = seconds_since(start);
  out.pass = best_equal && last_equal;
  out.detail = std::string("checkpoint bytes ") +
               (best_equal && last_equal ? "identical" : "differ") + ", " +
               format_double(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 10 (gated): classical pipeline on the reference dataset.
// ---------------------------------------------------------------------------
Outcome criterion_10() {
  Outcome out;
  const char* root_env = std::getenv("JETFIT_PCPNET_ROOT");
  fs::path root = root_env != nullptr ? fs::path(root_env) : fs::path("data/pcpnet");
  const fs::path list = root / "testset_no_noise.txt";
  if (!fs::exists(list)) {
    out.skipped = true;
    out.detail = "dataset not present (looked for " + list.string() + ")";
    return out;
  }
  const auto start = Clock::now();

  std::vector<ManifestEntry> manifest;
  std::ifstream in(list);
  for (std::string line; std::getline(in, line);) {
    std::istringstream ss(line);
    std::string name;
    if (ss >> name) manifest.push_back({root / name, "none"});
  }
  if (manifest.empty()) {
    out.detail = "dataset list is empty";
    return out;
  }

  std::vector<MethodSpec> methods{parse_method("jet@122")};
  BenchmarkOptions options;
  options.fit.jet_order = 3;
  options.threads = 2;
  const EvalReport report = run_benchmark(manifest, methods, options, nullptr);
  const double got = report.results.at("jet@122").at("none").rmse_deg;
  const double elapsed = seconds_since(start);
  out.pass = std::abs(got - 12.35) <= 2.0;
  out.detail = "no-noise RMSE " + format_double(got) +
               " deg vs reference 12.35 +- 2, " + format_double(elapsed) + " s";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&selected](int id) { return selected.empty() || selected.contains(id); };

  struct Entry {
    int id;
    const char* title;
    Outcome (*run)();
  };
  const std::vector<Entry> entries = {
      {1, "weighted solve matches the dense-inverse oracle", criterion_1},
      {2, "end-to-end gradients match finite differences", criterion_2},
      {3, "exact surfaces are recovered to tolerance", criterion_3},
      {4, "log barrier prevents weight collapse", criterion_4},
      {5, "trained weights suppress injected outliers", criterion_5},
      {6, "trained weights beat the uniform ablation by 10 percent", criterion_6},
      {7, "larger neighborhoods help under noise, are neutral without", criterion_7},
      {8, "metrics match brute-force oracles", criterion_8},
      {9, "single-threaded training runs are bitwise identical", criterion_9},
      {10, "classical pipeline reproduces the reference benchmark", criterion_10},
  };

  int failures = 0;
  for (const Entry& entry : entries) {
    if (!wanted(entry.id)) continue;
    Outcome outcome;
    try {
      outcome = entry.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const char* verdict = outcome.skipped ? "[SKIP]" : outcome.pass ? "[PASS]" : "[FAIL]";
    std::cout << verdict << " criterion " << entry.id << ": " << entry.title << " ("
              << outcome.detail << ")\n";
    if (!outcome.pass && !outcome.skipped) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
