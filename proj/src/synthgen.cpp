#include "ppap/synthgen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ppap/errors.hpp"
#include "ppap/rng.hpp"
#include "ppap/toml.hpp"

namespace ppap {

void validate_spec(const MixtureSpec& spec) {
  if (spec.dim == 0) raise(ErrorKind::ConfigInvalid, "dim must be >= 1");
  if (spec.count == 0) raise(ErrorKind::ConfigInvalid, "count must be >= 1");
  if (spec.components.empty()) {
    raise(ErrorKind::ConfigInvalid, "at least one component required");
  }
  double weight_sum = 0.0;
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    const MixtureComponent& comp = spec.components[c];
    if (!(comp.weight > 0.0)) {
      raise(ErrorKind::ConfigInvalid,
            "component " + std::to_string(c) + " weight must be positive");
    }
    if (!(comp.concentration >= 0.0)) {
      raise(ErrorKind::ConfigInvalid,
            "component " + std::to_string(c) + " concentration must be >= 0");
    }
    if (comp.mean_direction.size() != spec.dim) {
      raise(ErrorKind::DimensionMismatch,
            "component " + std::to_string(c) + " mean has wrong dimension");
    }
    double norm_sq = 0.0;
    for (double x : comp.mean_direction) norm_sq += x * x;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
      raise(ErrorKind::NormalizationMismatch,
            "component " + std::to_string(c) + " mean is not unit length");
    }
    weight_sum += comp.weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    raise(ErrorKind::ConfigInvalid, "component weights must sum to 1");
  }
}

FeatureBatch sample_mixture(const MixtureSpec& spec) {
  validate_spec(spec);
  const std::size_t dim = spec.dim;
  const std::size_t k = spec.components.size();

  std::vector<double> cumulative(k);
  double acc = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    acc += spec.components[c].weight;
    cumulative[c] = acc;
  }

  FeatureBatch batch;
  batch.data = Matrix(spec.count, dim);
  batch.labels = std::vector<uint32_t>(spec.count);
  batch.normalized = true;

  Rng rng(spec.seed);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const double u = rng.uniform01();
    std::size_t c = 0;
    while (c + 1 < k && u >= cumulative[c]) ++c;
    const MixtureComponent& comp = spec.components[c];
    const double spread =
        comp.concentration > 0.0 ? 1.0 / std::sqrt(comp.concentration) : 0.0;

    double norm = 0.0;
    do {
      for (std::size_t d = 0; d < dim; ++d) {
        const double g = rng.normal();
        x[d] = comp.concentration > 0.0 ? comp.mean_direction[d] + spread * g : g;
      }
      norm = l2_norm(x.data(), dim);
    } while (norm < 1e-12);

    double* row = batch.data.row(i);
    for (std::size_t d = 0; d < dim; ++d) row[d] = x[d] / norm;
    (*batch.labels)[i] = static_cast<uint32_t>(c);
  }
  return batch;
}

namespace {

std::vector<double> axis(uint32_t dim, uint32_t index) {
  std::vector<double> v(dim, 0.0);
  v[index] = 1.0;
  return v;
}

std::vector<double> unit_blend(uint32_t dim, uint32_t a, uint32_t b, double wa,
                               double wb) {
  std::vector<double> v(dim, 0.0);
  v[a] = wa;
  v[b] = wb;
  const double norm = std::sqrt(wa * wa + wb * wb);
  v[a] /= norm;
  v[b] /= norm;
  return v;
}

}  // namespace

MixtureSpec two_cluster_spec(uint32_t count, uint32_t dim, double concentration,
                             uint64_t seed) {
  MixtureSpec spec;
  spec.dim = dim;
  spec.count = count;
  spec.seed = seed;
  spec.components = {{0.5, axis(dim, 0), concentration},
                     {0.5, axis(dim, 1), concentration}};
  return spec;
}

MixtureSpec overlap8_spec(uint64_t seed) {
  MixtureSpec spec;
  spec.dim = 32;
  spec.count = 4096;
  spec.seed = seed;
  // Six well-separated directions plus two deliberate near-duplicates of the
  // first two, with uneven weights and mixed tightness.
  spec.components = {
      {0.22, axis(32, 0), 60.0},
      {0.18, axis(32, 4), 45.0},
      {0.15, axis(32, 8), 80.0},
      {0.12, axis(32, 12), 35.0},
      {0.10, axis(32, 16), 55.0},
      {0.09, axis(32, 20), 25.0},
      {0.08, unit_blend(32, 0, 24, 0.92, 0.3919183588453085), 50.0},
      {0.06, unit_blend(32, 4, 28, 0.92, 0.3919183588453085), 40.0},
  };
  return spec;
}

MixtureSpec long_tail_spec(uint64_t seed) {
  MixtureSpec spec;
  spec.dim = 16;
  spec.count = 2048;
  spec.seed = seed;
  const uint32_t k = 6;
  double raw = 0.5;
  double sum = 0.0;
  std::vector<double> weights;
  for (uint32_t c = 0; c < k; ++c) {
    weights.push_back(raw);
    sum += raw;
    raw *= 0.5;
  }
  // The head class is near-uniform scatter, like stuff regions in a scene;
  // the rare classes are tight blobs on mutually orthogonal directions, and
  // rarer means tighter. A global partitioner has to spread the diffuse mass
  // across every cluster, while threshold mining abstains on it.
  for (uint32_t c = 0; c < k; ++c) {
    MixtureComponent comp;
    comp.weight = weights[c] / sum;
    comp.mean_direction = axis(16, c);
    comp.concentration = c == 0 ? 0.5 : 55.0 + 10.0 * (c - 1);
    spec.components.push_back(std::move(comp));
  }
  return spec;
}

namespace {

using nlohmann::json;

void rescale_component(MixtureComponent& comp, std::size_t index) {
  double norm_sq = 0.0;
  for (double x : comp.mean_direction) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    raise(ErrorKind::ZeroVector,
          "component " + std::to_string(index) + " mean has zero norm");
  }
  for (double& x : comp.mean_direction) x /= norm;
}

MixtureSpec spec_from_json(const json& root, const std::string& origin) {
  MixtureSpec spec;
  try {
    spec.dim = root.at("dim").get<uint32_t>();
    spec.count = root.at("count").get<uint32_t>();
    spec.seed = root.value("seed", 0ull);
    const auto& comps = root.contains("components") ? root["components"]
                                                    : root.at("component");
    for (const auto& entry : comps) {
      MixtureComponent comp;
      comp.weight = entry.at("weight").get<double>();
      comp.mean_direction = entry.at("mean").get<std::vector<double>>();
      comp.concentration = entry.value("concentration", 1.0);
      spec.components.push_back(std::move(comp));
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::ParseError, origin + ": " + e.what());
  }
  return spec;
}

MixtureSpec spec_from_toml(const toml::Value& root, const std::string& origin) {
  if (!root.is_table()) raise(ErrorKind::ParseError, origin + ": expected a table");
  const toml::Table& table = root.as_table();
  auto require = [&](const char* key) -> const toml::Value& {
    const auto it = table.find(key);
    if (it == table.end()) {
      raise(ErrorKind::ParseError, origin + ": missing key '" + key + "'");
    }
    return it->second;
  };
  MixtureSpec spec;
  const toml::Value& dim = require("dim");
  const toml::Value& count = require("count");
  if (!dim.is_int() || !count.is_int()) {
    raise(ErrorKind::ParseError, origin + ": dim and count must be integers");
  }
  if (dim.as_int() < 1 || count.as_int() < 1) {
    raise(ErrorKind::ConfigInvalid, origin + ": dim and count must be >= 1");
  }
  spec.dim = static_cast<uint32_t>(dim.as_int());
  spec.count = static_cast<uint32_t>(count.as_int());
  if (auto it = table.find("seed"); it != table.end()) {
    if (!it->second.is_int() || it->second.as_int() < 0) {
      raise(ErrorKind::ParseError, origin + ": seed must be a non-negative integer");
    }
    spec.seed = static_cast<uint64_t>(it->second.as_int());
  }
  auto comps_it = table.find("component");
  if (comps_it == table.end()) comps_it = table.find("components");
  if (comps_it == table.end() || !comps_it->second.is_array()) {
    raise(ErrorKind::ParseError, origin + ": no [[component]] entries");
  }
  for (const toml::Value& entry : comps_it->second.as_array()) {
    if (!entry.is_table()) {
      raise(ErrorKind::ParseError, origin + ": component entries must be tables");
    }
    const toml::Table& ct = entry.as_table();
    MixtureComponent comp;
    const auto weight = ct.find("weight");
    const auto mean = ct.find("mean");
    if (weight == ct.end() || !weight->second.is_number() || mean == ct.end() ||
        !mean->second.is_array()) {
      raise(ErrorKind::ParseError,
            origin + ": each component needs a numeric weight and a mean array");
    }
    comp.weight = weight->second.as_double();
    for (const toml::Value& x : mean->second.as_array()) {
      if (!x.is_number()) {
        raise(ErrorKind::ParseError, origin + ": mean entries must be numbers");
      }
      comp.mean_direction.push_back(x.as_double());
    }
    if (auto conc = ct.find("concentration"); conc != ct.end()) {
      if (!conc->second.is_number()) {
        raise(ErrorKind::ParseError, origin + ": concentration must be a number");
      }
      comp.concentration = conc->second.as_double();
    }
    spec.components.push_back(std::move(comp));
  }
  return spec;
}

}  // namespace

MixtureSpec load_mixture_spec(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) raise(ErrorKind::IoFailure, "cannot open " + path.string());
  int first = probe.peek();
  while (first == ' ' || first == '\t' || first == '\n' || first == '\r') {
    probe.get();
    first = probe.peek();
  }
  probe.close();

  MixtureSpec spec;
  if (first == '{') {
    std::ifstream in(path, std::ios::binary);
    json root;
    try {
      root = json::parse(in);
    } catch (const json::parse_error& e) {
      raise(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    spec = spec_from_json(root, path.string());
  } else {
    spec = spec_from_toml(toml::parse_file(path), path.string());
  }

  double weight_sum = 0.0;
  for (const auto& comp : spec.components) {
    if (!(comp.weight > 0.0)) {
      raise(ErrorKind::ConfigInvalid, path.string() + ": weights must be positive");
    }
    weight_sum += comp.weight;
  }
  if (weight_sum <= 0.0) {
    raise(ErrorKind::ConfigInvalid, path.string() + ": weights sum to zero");
  }
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    spec.components[c].weight /= weight_sum;
    rescale_component(spec.components[c], c);
  }
  validate_spec(spec);
  return spec;
}

namespace {

json spec_to_json(const MixtureSpec& spec) {
  json root;
  root["dim"] = spec.dim;
  root["count"] = spec.count;
  root["seed"] = spec.seed;
  json comps = json::array();
  for (const auto& comp : spec.components) {
    comps.push_back({{"weight", comp.weight},
                     {"mean", comp.mean_direction},
                     {"concentration", comp.concentration}});
  }
  root["components"] = std::move(comps);
  return root;
}

}  // namespace

void save_mixture_spec_json(const MixtureSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << spec_to_json(spec).dump(2) << '\n';
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

std::string mixture_spec_to_json_string(const MixtureSpec& spec) {
  return spec_to_json(spec).dump();
}

MixtureSpec mixture_spec_from_json_string(const std::string& text,
                                          const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::ParseError, origin + ": " + e.what());
  }
  MixtureSpec spec = spec_from_json(root, origin);
  validate_spec(spec);
  return spec;
}

// Everything below re-derives the mining rules with plain scans on purpose.
// It must stay free of calls into the engine so the two implementations can
// disagree when one of them is wrong.
OracleOutput oracle_mine(const FeatureBatch& batch, const MiningConfig& config,
                         std::size_t anchor) {
  validate_config(config);
  if (anchor >= batch.n()) raise(ErrorKind::ConfigInvalid, "anchor out of range");
  const std::size_t n = batch.n();
  const std::size_t dim = batch.dim();

  auto similarities = [&](const std::vector<double>& v) {
    std::vector<double> sims(n);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += v[d] * batch.data.at(j, d);
      sims[j] = s;
    }
    return sims;
  };

  std::vector<double> proxy(batch.data.row(anchor), batch.data.row(anchor) + dim);
  double phi = config.phi0;
  double psi = config.psi0;

  double proxy_norm_sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) proxy_norm_sq += proxy[d] * proxy[d];

  std::vector<double> sims = similarities(proxy);
  std::vector<uint32_t> positives;
  for (std::size_t j = 0; j < n; ++j) {
    if (sims[j] > phi) positives.push_back(static_cast<uint32_t>(j));
  }
  if (positives.empty()) positives.push_back(static_cast<uint32_t>(anchor));

  OracleOutput out;
  out.trajectory.push_back({proxy, phi, psi, psi, std::sqrt(proxy_norm_sq)});

  for (uint32_t t = 1; t <= config.steps; ++t) {
    std::vector<double> mean(dim, 0.0);
    for (uint32_t j : positives) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += batch.data.at(j, d);
    }
    for (std::size_t d = 0; d < dim; ++d) {
      mean[d] /= static_cast<double>(positives.size());
    }
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) norm_sq += mean[d] * mean[d];
    const double mean_norm = std::sqrt(norm_sq);

    std::vector<double> v_new;
    if (config.normalize_proxy) {
      if (mean_norm < 1e-12) {
        v_new = proxy;  // directionless mean: the proxy stays put
      } else {
        v_new.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) v_new[d] = mean[d] / mean_norm;
      }
    } else {
      v_new = mean;
    }

    double sim = 0.0;
    for (std::size_t d = 0; d < dim; ++d) sim += proxy[d] * v_new[d];

    phi = phi - (1.0 - sim) / config.sigma_pos;
    const double psi_raw = psi + (1.0 - sim) / config.sigma_amb;
    const double ceiling = phi - config.clamp_margin;
    psi = psi_raw < ceiling ? psi_raw : ceiling;
    proxy = v_new;

    sims = similarities(proxy);
    positives.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (sims[j] > phi) positives.push_back(static_cast<uint32_t>(j));
    }
    if (positives.empty()) positives.push_back(static_cast<uint32_t>(anchor));

    out.trajectory.push_back({proxy, phi, psi_raw, psi, mean_norm});
  }

  if (psi >= phi) {
    raise(ErrorKind::CriterionInversion, "oracle: psi >= phi after clamping");
  }

  out.positives = positives;
  std::vector<bool> in_p(n, false);
  for (uint32_t j : positives) in_p[j] = true;
  for (std::size_t j = 0; j < n; ++j) {
    if (in_p[j]) continue;
    if (sims[j] > psi && sims[j] < phi) {
      out.ambiguous.push_back(static_cast<uint32_t>(j));
    } else {
      out.negatives.push_back(static_cast<uint32_t>(j));
    }
  }
  return out;
}

}  // namespace ppap
