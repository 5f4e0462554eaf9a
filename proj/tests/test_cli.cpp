#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "jetfit/evaluate.hpp"
#include "jetfit/pcpnet_io.hpp"
#include "jetfit/metrics.hpp"

using namespace jetfit;
namespace fs = std::filesystem;

namespace {

// The binary path arrives through the environment (set by the test harness).
const char* cli_path() { return std::getenv("JETFIT_CLI"); }

int run(const std::string& args, const fs::path& cwd) {
  const std::string cmd =
      "cd " + cwd.string() + " && " + cli_path() + " " + args + " >cli_stdout.log 2>cli_stderr.log";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("jetfit_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synthesis is reproducible and writes a run manifest") {
  if (cli_path() == nullptr) return;  // harness runs this via ctest
  const fs::path dir = fresh_dir("synth");
  REQUIRE(run("synth --kind torus --radius 2 --minor-radius 0.5 --count 2000 --seed 5 --out a",
              dir) == 0);
  REQUIRE(run("synth --kind torus --radius 2 --minor-radius 0.5 --count 2000 --seed 5 --out b",
              dir) == 0);
  CHECK(slurp(dir / "a.xyz") == slurp(dir / "b.xyz"));
  CHECK(slurp(dir / "a.normals") == slurp(dir / "b.normals"));
  CHECK(fs::exists(dir / "a.manifest.json"));
  CHECK(slurp(dir / "a.manifest.json").find("\"command\": \"synth\"") !=
        std::string::npos);
}

TEST_CASE("bad invocations exit nonzero with a message on stderr") {
  if (cli_path() == nullptr) return;
  const fs::path dir = fresh_dir("badflags");
  CHECK(run("synth --kind dodecahedron --out x", dir) != 0);
  CHECK(!slurp(dir / "cli_stderr.log").empty());
  CHECK(run("fit --input nowhere --out y", dir) != 0);   // no checkpoint, no uniform
  CHECK(run("frobnicate", dir) != 0);                    // unknown subcommand
  CHECK(run("eval --manifest missing.txt", dir) != 0);
  CHECK(run("train --out t", dir) != 0);                 // no shapes anywhere
}

TEST_CASE("uniform-weight fit reproduces the library pipeline on a plane") {
  if (cli_path() == nullptr) return;
  const fs::path dir = fresh_dir("fit");
  REQUIRE(run("synth --kind plane --count 1200 --seed 3 --out plane", dir) == 0);
  REQUIRE(run("fit --input plane --uniform-weights --k 32 --order 2 --out out --threads 1",
              dir) == 0);

  const PointCloud cloud = load_pcpnet(dir / "plane");
  std::ifstream normals(dir / "out.normals");
  REQUIRE(normals.good());
  double nx, ny, nz;
  int rows = 0;
  while (normals >> nx >> ny >> nz) {
    // Constant normal column: every row is the plane normal up to sign.
    CHECK(angle_error_unoriented_deg(Eigen::Vector3d(nx, ny, nz),
                                     Eigen::Vector3d(0, 0, 1)) < 1e-4);
    ++rows;
  }
  CHECK(rows == cloud.size());

  FitConfig config;
  config.k_neighbors = 32;
  config.jet_order = 2;
  config.uniform_weights = true;
  const CloudFitOutput expected = fit_cloud(cloud, config, nullptr, 1);
  std::ifstream weights(dir / "out.weights");
  double w;
  int i = 0;
  while (weights >> w) CHECK(w == doctest::Approx(expected.summed_weights[i++]));
  CHECK(i == cloud.size());
}

TEST_CASE("synth, train, eval and denoise chain end to end") {
  if (cli_path() == nullptr) return;
  const fs::path dir = fresh_dir("e2e");
  REQUIRE(run("synth --kind sphere --radius 1 --count 900 --seed 1 --noise 0.004 --out s1",
              dir) == 0);
  REQUIRE(run("synth --kind cylinder --radius 0.7 --count 900 --seed 2 --noise 0.004 --out s2",
              dir) == 0);
  std::ofstream(dir / "shapes.txt") << "s1\ns2\n";

  REQUIRE(run("train --shapes shapes.txt --out run --epochs 2 --samples-per-epoch 64 "
              "--batch-size 16 --k 16 --order 2 --threads 1 --seed 9 "
              "--net-local 6 --net-mid 6 --net-global 12 --net-head 8,6,4",
              dir) == 0);
  CHECK(fs::exists(dir / "run" / "checkpoint.jfck"));
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
  CHECK(fs::exists(dir / "run" / "manifest.json"));

  std::ofstream(dir / "eval_list.txt") << "s1 none\n";
  REQUIRE(run("eval --manifest eval_list.txt --methods neural,jet,pca --checkpoint "
              "run/checkpoint.jfck --k 16 --order 2 --out report --threads 2",
              dir) == 0);
  CHECK(fs::exists(dir / "report" / "report.json"));
  CHECK(fs::exists(dir / "report" / "manifest.json"));
  const std::string table = slurp(dir / "cli_stdout.log");
  CHECK(table.find("angle RMSE") != std::string::npos);

  REQUIRE(run("denoise --input s1 --checkpoint run/checkpoint.jfck --k 16 --order 2 "
              "--out clean --threads 2",
              dir) == 0);
  CHECK(fs::exists(dir / "clean.xyz"));
  const PointCloud cleaned = load_pcpnet(dir / "clean");
  const PointCloud original = load_pcpnet(dir / "s1");
  CHECK(cleaned.size() <= original.size());
}

TEST_CASE("train runs reproduce checkpoints bitwise with one thread") {
  if (cli_path() == nullptr) return;
  const fs::path dir = fresh_dir("train_det");
  REQUIRE(run("synth --kind sphere --radius 1 --count 800 --seed 4 --out s", dir) == 0);
  std::ofstream(dir / "shapes.txt") << "s\n";
  const std::string train_args =
      "train --shapes shapes.txt --epochs 2 --samples-per-epoch 48 --batch-size 16 "
      "--k 12 --order 1 --threads 1 --seed 33 --net-local 4 --net-mid 4 "
      "--net-global 8 --net-head 6,4,3 --out ";
  REQUIRE(run(train_args + "run_a", dir) == 0);
  REQUIRE(run(train_args + "run_b", dir) == 0);
  CHECK(slurp(dir / "run_a" / "checkpoint.jfck") ==
        slurp(dir / "run_b" / "checkpoint.jfck"));
}

}  // TEST_SUITE
