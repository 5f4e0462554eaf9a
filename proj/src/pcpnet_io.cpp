#include "jetfit/pcpnet_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace jetfit {

namespace {

std::vector<std::vector<double>> read_rows(const std::filesystem::path& file,
                                           size_t columns) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<double> values;
    std::string token;
    while (ss >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0')
        throw ParseError(file.string() + ":" + std::to_string(line_no) +
                         ": unparseable token '" + token + "'");
      values.push_back(v);
    }
    if (values.empty()) continue;  // blank line
    if (values.size() != columns)
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(columns) + " values, found " +
                       std::to_string(values.size()));
    rows.push_back(std::move(values));
  }
  return rows;
}

void check_aligned(const std::filesystem::path& a, size_t rows_a,
                   const std::filesystem::path& b, size_t rows_b) {
  if (rows_a != rows_b)
    throw FormatError("row count mismatch: " + a.string() + " has " +
                      std::to_string(rows_a) + " rows but " + b.string() + " has " +
                      std::to_string(rows_b));
}

// %.17g round-trips doubles exactly through parse.
void write_rows(const std::filesystem::path& file, const Eigen::MatrixXd& values) {
  std::FILE* out = std::fopen(file.string().c_str(), "w");
  if (out == nullptr) throw IoError("cannot open " + file.string() + " for writing");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      std::fprintf(out, j == 0 ? "%.17g" : " %.17g", values(i, j));
    std::fputc('\n', out);
  }
  if (std::fclose(out) != 0) throw IoError("write failed: " + file.string());
}

}  // namespace

PointCloud load_pcpnet(const std::filesystem::path& basepath) {
  namespace fs = std::filesystem;
  const fs::path xyz = fs::path(basepath).concat(".xyz");
  const fs::path normals = fs::path(basepath).concat(".normals");
  const fs::path curv = fs::path(basepath).concat(".curv");
  const fs::path pidx = fs::path(basepath).concat(".pidx");

  const auto pos = read_rows(xyz, 3);
  if (pos.empty()) throw FormatError(xyz.string() + " contains no points");

  PointCloud cloud;
  cloud.positions.resize(static_cast<Eigen::Index>(pos.size()), 3);
  for (size_t i = 0; i < pos.size(); ++i)
    cloud.positions.row(static_cast<Eigen::Index>(i)) << pos[i][0], pos[i][1], pos[i][2];

  if (fs::exists(normals)) {
    const auto rows = read_rows(normals, 3);
    check_aligned(xyz, pos.size(), normals, rows.size());
    cloud.gt_normals.emplace(static_cast<Eigen::Index>(rows.size()), 3);
    for (size_t i = 0; i < rows.size(); ++i)
      cloud.gt_normals->row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1],
          rows[i][2];
  }
  if (fs::exists(curv)) {
    const auto rows = read_rows(curv, 2);
    check_aligned(xyz, pos.size(), curv, rows.size());
    cloud.gt_curvatures.emplace(static_cast<Eigen::Index>(rows.size()), 2);
    for (size_t i = 0; i < rows.size(); ++i)
      cloud.gt_curvatures->row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1];
  }
  if (fs::exists(pidx)) {
    const auto rows = read_rows(pidx, 1);
    cloud.eval_indices.emplace();
    cloud.eval_indices->reserve(rows.size());
    for (const auto& row : rows) {
      const double v = row[0];
      const int idx = static_cast<int>(v);
      if (static_cast<double>(idx) != v || idx < 0 ||
          idx >= static_cast<int>(pos.size()))
        throw FormatError(pidx.string() + ": index " + std::to_string(v) +
                          " is out of range for " + std::to_string(pos.size()) +
                          " points");
      cloud.eval_indices->push_back(idx);
    }
  }
  cloud.validate();
  return cloud;
}

void save_pcpnet(const PointCloud& cloud, const std::filesystem::path& basepath,
                 const SaveSelection& what) {
  namespace fs = std::filesystem;
  cloud.validate();
  write_rows(fs::path(basepath).concat(".xyz"), cloud.positions);
  if (what.normals && cloud.gt_normals)
    write_rows(fs::path(basepath).concat(".normals"), *cloud.gt_normals);
  if (what.curvatures && cloud.gt_curvatures)
    write_rows(fs::path(basepath).concat(".curv"), *cloud.gt_curvatures);
  if (what.eval_indices && cloud.eval_indices) {
    Eigen::MatrixXd idx(static_cast<Eigen::Index>(cloud.eval_indices->size()), 1);
    for (size_t i = 0; i < cloud.eval_indices->size(); ++i)
      idx(static_cast<Eigen::Index>(i), 0) = (*cloud.eval_indices)[i];
    write_rows(fs::path(basepath).concat(".pidx"), idx);
  }
}

}  // namespace jetfit
