#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace jetfit {

inline constexpr const char* kToolVersion = "jetfit 0.1.0";

/// FNV-1a of a file's bytes, as a fixed-width hex string.
std::string hash_file(const std::filesystem::path& path);

/// Provenance record written next to every command's outputs: the command,
/// the fully resolved configuration, seeds, input hashes, tool version and
/// timestamps. Re-running the recorded command in deterministic mode
/// reproduces the outputs bitwise.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::ordered_json config;
  std::vector<std::pair<std::string, std::string>> input_hashes;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
};

std::string iso8601_now();

}  // namespace jetfit
