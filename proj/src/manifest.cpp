#include "ppap/manifest.hpp"

#include <fstream>

#include "ppap/errors.hpp"

namespace ppap {

using nlohmann::json;

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  json root;
  root["tool"] = "ppap";
  root["version"] = manifest.version;
  root["subcommand"] = manifest.subcommand;
  root["seed"] = manifest.seed;
  root["inputs"] = manifest.inputs;
  root["outputs"] = manifest.outputs;
  root["duration_seconds"] = manifest.duration_seconds;
  root["plan"] = manifest.plan;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << root.dump(2) << '\n';
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::MalformedHeader, path.string() + ": " + e.what());
  }
  RunManifest manifest;
  try {
    if (root.value("tool", "") != "ppap") {
      raise(ErrorKind::MalformedHeader, path.string() + ": not a run manifest");
    }
    manifest.version = root.value("version", "");
    manifest.subcommand = root.at("subcommand").get<std::string>();
    manifest.seed = root.value("seed", 0ull);
    manifest.inputs = root.value("inputs", std::vector<std::string>{});
    manifest.outputs = root.value("outputs", std::vector<std::string>{});
    manifest.duration_seconds = root.value("duration_seconds", 0.0);
    manifest.plan = root.at("plan");
  } catch (const json::exception& e) {
    raise(ErrorKind::MalformedHeader, path.string() + ": " + e.what());
  }
  return manifest;
}

}  // namespace ppap
