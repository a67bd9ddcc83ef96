#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ppap/binary_io.hpp"
#include "ppap/errors.hpp"
#include "ppap/mining.hpp"

namespace ppap {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'P', 'A', 'P', 'M', 'I', 'N', 'E'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kFlagSourceIndices = 0x01;

void check_index_list(const std::vector<uint32_t>& v, uint32_t n, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= n) {
      raise(ErrorKind::MalformedHeader,
            std::string(what) + " holds index " + std::to_string(v[i]) +
                " outside n=" + std::to_string(n));
    }
    if (i > 0 && v[i] <= v[i - 1]) {
      raise(ErrorKind::MalformedHeader,
            std::string(what) + " is not strictly ascending");
    }
  }
}

void check_result(const MiningResult& result) {
  for (const AnchorSets& sets : result.anchors) {
    if (sets.anchor >= result.n) {
      raise(ErrorKind::MalformedHeader, "anchor id outside n");
    }
    check_index_list(sets.positives, result.n, "positive set");
    check_index_list(sets.ambiguous, result.n, "ambiguous set");
    std::size_t p = 0, a = 0;
    while (p < sets.positives.size() && a < sets.ambiguous.size()) {
      if (sets.positives[p] == sets.ambiguous[a]) {
        raise(ErrorKind::MalformedHeader, "positive and ambiguous sets overlap");
      }
      if (sets.positives[p] < sets.ambiguous[a]) {
        ++p;
      } else {
        ++a;
      }
    }
  }
  if (result.source_indices && result.source_indices->size() != result.n) {
    raise(ErrorKind::MalformedHeader, "source index map length does not match n");
  }
}

json to_json(const MiningResult& result) {
  json root;
  root["format"] = "ppap-mining";
  root["version"] = kVersion;
  root["n"] = result.n;
  root["strategy"] = result.strategy;
  root["params"] = json::object();
  for (const auto& [key, value] : result.params) root["params"][key] = value;
  if (result.source_indices) root["source_indices"] = *result.source_indices;
  json anchors = json::array();
  for (const AnchorSets& sets : result.anchors) {
    json entry;
    entry["anchor"] = sets.anchor;
    entry["positives"] = sets.positives;
    entry["ambiguous"] = sets.ambiguous;
    entry["steps"] = sets.steps;
    // JSON has no NaN literal; absent keys mean "no such diagnostic".
    if (std::isfinite(sets.phi)) entry["phi"] = sets.phi;
    if (std::isfinite(sets.psi)) entry["psi"] = sets.psi;
    if (std::isfinite(sets.proxy_norm)) entry["proxy_norm"] = sets.proxy_norm;
    anchors.push_back(std::move(entry));
  }
  root["anchors"] = std::move(anchors);
  return root;
}

MiningResult from_json(const json& root, const std::string& origin) {
  if (!root.is_object() || root.value("format", "") != "ppap-mining") {
    raise(ErrorKind::MalformedHeader, origin + ": not a mining result file");
  }
  if (root.value("version", 0u) != kVersion) {
    raise(ErrorKind::MalformedHeader, origin + ": unsupported version");
  }
  MiningResult result;
  try {
    result.n = root.at("n").get<uint32_t>();
    result.strategy = root.at("strategy").get<std::string>();
    for (const auto& [key, value] : root.at("params").items()) {
      result.params[key] = value.get<double>();
    }
    if (root.contains("source_indices")) {
      result.source_indices = root["source_indices"].get<std::vector<uint32_t>>();
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& entry : root.at("anchors")) {
      AnchorSets sets;
      sets.anchor = entry.at("anchor").get<uint32_t>();
      sets.positives = entry.at("positives").get<std::vector<uint32_t>>();
      sets.ambiguous = entry.at("ambiguous").get<std::vector<uint32_t>>();
      sets.steps = entry.at("steps").get<uint32_t>();
      sets.phi = entry.value("phi", nan);
      sets.psi = entry.value("psi", nan);
      sets.proxy_norm = entry.value("proxy_norm", nan);
      result.anchors.push_back(std::move(sets));
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::MalformedHeader, origin + ": " + e.what());
  }
  check_result(result);
  return result;
}

void write_index_list(std::ostream& out, const std::vector<uint32_t>& v) {
  io::write_le<uint64_t>(out, v.size());
  io::write_bytes(out, v.data(), v.size() * sizeof(uint32_t));
}

std::vector<uint32_t> read_index_list(std::istream& in, const char* what) {
  const auto count = io::read_le<uint64_t>(in, ErrorKind::TruncatedPayload, what);
  if (count > (1ull << 32)) {
    raise(ErrorKind::MalformedHeader, std::string(what) + ": implausible length");
  }
  std::vector<uint32_t> v(static_cast<std::size_t>(count));
  io::read_bytes(in, v.data(), v.size() * sizeof(uint32_t), ErrorKind::TruncatedPayload,
                 what);
  return v;
}

}  // namespace

void save_mining_json(const MiningResult& result, const std::filesystem::path& path) {
  check_result(result);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << to_json(result).dump(2) << '\n';
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

MiningResult load_mining_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::MalformedHeader, path.string() + ": " + e.what());
  }
  return from_json(root, path.string());
}

void save_mining_binary(const MiningResult& result, const std::filesystem::path& path) {
  check_result(result);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");

  io::write_bytes(out, kMagic, sizeof kMagic);
  io::write_le<uint32_t>(out, kVersion);
  io::write_le<uint32_t>(out, result.n);
  io::write_le<uint8_t>(out, result.source_indices ? kFlagSourceIndices : 0);
  io::write_le<uint32_t>(out, static_cast<uint32_t>(result.strategy.size()));
  io::write_bytes(out, result.strategy.data(), result.strategy.size());
  io::write_le<uint32_t>(out, static_cast<uint32_t>(result.params.size()));
  for (const auto& [key, value] : result.params) {
    io::write_le<uint32_t>(out, static_cast<uint32_t>(key.size()));
    io::write_bytes(out, key.data(), key.size());
    io::write_le<double>(out, value);
  }
  if (result.source_indices) write_index_list(out, *result.source_indices);
  io::write_le<uint64_t>(out, result.anchors.size());
  for (const AnchorSets& sets : result.anchors) {
    io::write_le<uint32_t>(out, sets.anchor);
    io::write_le<double>(out, sets.phi);
    io::write_le<double>(out, sets.psi);
    io::write_le<double>(out, sets.proxy_norm);
    io::write_le<uint32_t>(out, sets.steps);
    write_index_list(out, sets.positives);
    write_index_list(out, sets.ambiguous);
  }
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

MiningResult load_mining_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());

  char magic[8];
  io::read_bytes(in, magic, sizeof magic, ErrorKind::MalformedHeader, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    raise(ErrorKind::MalformedHeader, path.string() + ": bad magic");
  }
  const auto version = io::read_le<uint32_t>(in, ErrorKind::MalformedHeader, "version");
  if (version != kVersion) {
    raise(ErrorKind::MalformedHeader, path.string() + ": unsupported version");
  }
  MiningResult result;
  result.n = io::read_le<uint32_t>(in, ErrorKind::MalformedHeader, "n");
  const auto flags = io::read_le<uint8_t>(in, ErrorKind::MalformedHeader, "flags");
  if (flags & ~kFlagSourceIndices) {
    raise(ErrorKind::MalformedHeader, path.string() + ": unknown flag bits");
  }
  const auto strategy_len =
      io::read_le<uint32_t>(in, ErrorKind::MalformedHeader, "strategy length");
  if (strategy_len > 256) {
    raise(ErrorKind::MalformedHeader, path.string() + ": implausible strategy length");
  }
  result.strategy.resize(strategy_len);
  io::read_bytes(in, result.strategy.data(), strategy_len, ErrorKind::TruncatedPayload,
                 "strategy");
  const auto param_count =
      io::read_le<uint32_t>(in, ErrorKind::MalformedHeader, "param count");
  if (param_count > 4096) {
    raise(ErrorKind::MalformedHeader, path.string() + ": implausible param count");
  }
  for (uint32_t i = 0; i < param_count; ++i) {
    const auto klen = io::read_le<uint32_t>(in, ErrorKind::TruncatedPayload, "param key");
    if (klen > 256) {
      raise(ErrorKind::MalformedHeader, path.string() + ": implausible key length");
    }
    std::string key(klen, '\0');
    io::read_bytes(in, key.data(), klen, ErrorKind::TruncatedPayload, "param key");
    result.params[key] =
        io::read_le<double>(in, ErrorKind::TruncatedPayload, "param value");
  }
  if (flags & kFlagSourceIndices) {
    result.source_indices = read_index_list(in, "source indices");
  }
  const auto anchor_count =
      io::read_le<uint64_t>(in, ErrorKind::TruncatedPayload, "anchor count");
  if (anchor_count > (1ull << 32)) {
    raise(ErrorKind::MalformedHeader, path.string() + ": implausible anchor count");
  }
  result.anchors.resize(static_cast<std::size_t>(anchor_count));
  for (AnchorSets& sets : result.anchors) {
    sets.anchor = io::read_le<uint32_t>(in, ErrorKind::TruncatedPayload, "anchor id");
    sets.phi = io::read_le<double>(in, ErrorKind::TruncatedPayload, "phi");
    sets.psi = io::read_le<double>(in, ErrorKind::TruncatedPayload, "psi");
    sets.proxy_norm = io::read_le<double>(in, ErrorKind::TruncatedPayload, "proxy norm");
    sets.steps = io::read_le<uint32_t>(in, ErrorKind::TruncatedPayload, "steps");
    sets.positives = read_index_list(in, "positive set");
    sets.ambiguous = read_index_list(in, "ambiguous set");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    raise(ErrorKind::MalformedHeader, path.string() + ": trailing bytes after payload");
  }
  check_result(result);
  return result;
}

MiningResult load_mining(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());
  const int first = in.peek();
  in.close();
  if (first == '{') return load_mining_json(path);
  return load_mining_binary(path);
}

}  // namespace ppap
