#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace ppap {

// Written next to every CLI run's outputs. The plan holds the fully resolved
// configuration, so re-executing a manifest needs no other config source.
struct RunManifest {
  std::string subcommand;
  uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  std::string version;
  nlohmann::json plan;
};

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

}  // namespace ppap
