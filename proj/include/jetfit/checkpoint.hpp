#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jetfit/optimizer.hpp"
#include "jetfit/weightnet.hpp"

namespace jetfit {

// Container format (documented in the README): the magic "JFCKPT01", a JSON
// metadata block, then each tensor by canonical name with its 2D shape and
// row-major float32 data. Byte output is a pure function of the contents.

nlohmann::ordered_json net_config_to_json(const WeightNetConfig& config);
WeightNetConfig net_config_from_json(const nlohmann::json& j);

struct CheckpointData {
  nlohmann::ordered_json meta;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  const Eigen::MatrixXd* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const WeightNetParams& params,
                     const AdamState* optimizer_state,
                     const nlohmann::ordered_json& extra_meta = {});

CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Reconstructs parameters (including running statistics) from a checkpoint.
WeightNetParams params_from_checkpoint(const CheckpointData& data);

/// Restores optimizer moments when the checkpoint carries them.
std::optional<AdamState> adam_from_checkpoint(const CheckpointData& data,
                                              const WeightNetParams& params);

}  // namespace jetfit
