#pragma once

#include <filesystem>

#include "jetfit/pointcloud.hpp"

namespace jetfit {

// Sibling ASCII files per shape: <base>.xyz holds one "x y z" row per point;
// <base>.normals, <base>.curv (k1 k2) and <base>.pidx (one evaluation index
// per row) are optional and must be row-aligned with the .xyz.

PointCloud load_pcpnet(const std::filesystem::path& basepath);

struct SaveSelection {
  bool normals = true;
  bool curvatures = true;
  bool eval_indices = true;
};

/// Writes the sibling files for whatever the cloud carries (and the selection
/// allows). Floats are printed round-trip exactly.
void save_pcpnet(const PointCloud& cloud, const std::filesystem::path& basepath,
                 const SaveSelection& what = {});

}  // namespace jetfit
