#include "ppap/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppap/baselines.hpp"
#include "ppap/eval.hpp"
#include "ppap/feature_batch.hpp"
#include "ppap/format.hpp"
#include "ppap/manifest.hpp"
#include "ppap/mining.hpp"
#include "ppap/objective.hpp"
#include "ppap/synthgen.hpp"
#include "ppap/toml.hpp"

namespace ppap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ConfigInvalid:
    case ErrorKind::MissingLabels:
    case ErrorKind::DimensionMismatch:
      return 2;
    case ErrorKind::IoFailure:
    case ErrorKind::MalformedHeader:
    case ErrorKind::TruncatedPayload:
    case ErrorKind::NonFiniteValue:
    case ErrorKind::NormalizationMismatch:
      return 3;
    case ErrorKind::ZeroVector:
    case ErrorKind::EmptyPositiveSet:
    case ErrorKind::CriterionInversion:
    case ErrorKind::NumericFailure:
      return 4;
  }
  return 1;
}

namespace {

// ---------------------------------------------------------------------------
// small filesystem helpers

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  const fs::path parent = file.parent_path();
  if (!parent.empty()) ensure_dir(parent);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// strict TOML table access: every key must be known, every type must match

const toml::Table& as_table(const toml::Value& value, const std::string& what) {
  if (!value.is_table()) raise(ErrorKind::ConfigInvalid, what + " must be a table");
  return value.as_table();
}

void reject_unknown(const toml::Table& table, const std::set<std::string>& allowed,
                    const std::string& what) {
  for (const auto& [key, value] : table) {
    if (!allowed.count(key)) {
      raise(ErrorKind::ConfigInvalid, what + ": unknown key '" + key + "'");
    }
  }
}

double num_field(const toml::Table& table, const std::string& key, double fallback,
                 const std::string& what) {
  const auto it = table.find(key);
  if (it == table.end()) return fallback;
  if (!it->second.is_number()) {
    raise(ErrorKind::ConfigInvalid, what + ": '" + key + "' must be a number");
  }
  return it->second.as_double();
}

int64_t int_field(const toml::Table& table, const std::string& key, int64_t fallback,
                  const std::string& what) {
  const auto it = table.find(key);
  if (it == table.end()) return fallback;
  if (!it->second.is_int()) {
    raise(ErrorKind::ConfigInvalid, what + ": '" + key + "' must be an integer");
  }
  return it->second.as_int();
}

bool bool_field(const toml::Table& table, const std::string& key, bool fallback,
                const std::string& what) {
  const auto it = table.find(key);
  if (it == table.end()) return fallback;
  if (!it->second.is_bool()) {
    raise(ErrorKind::ConfigInvalid, what + ": '" + key + "' must be a boolean");
  }
  return it->second.as_bool();
}

uint64_t seed_field(const toml::Table& table, const std::string& key, uint64_t fallback,
                    const std::string& what) {
  const int64_t raw = int_field(table, key, static_cast<int64_t>(fallback), what);
  if (raw < 0) raise(ErrorKind::ConfigInvalid, what + ": '" + key + "' must be >= 0");
  return static_cast<uint64_t>(raw);
}

// ---------------------------------------------------------------------------
// config structs <-> plan JSON

json mining_to_json(const MiningConfig& c) {
  return {{"phi0", c.phi0},
          {"psi0", c.psi0},
          {"sigma_pos", c.sigma_pos},
          {"sigma_amb", c.sigma_amb},
          {"steps", c.steps},
          {"clamp_margin", c.clamp_margin},
          {"normalize_proxy", c.normalize_proxy},
          {"allow_unnormalized", c.allow_unnormalized}};
}

MiningConfig mining_from_json(const json& j) {
  MiningConfig c;
  c.phi0 = j.value("phi0", c.phi0);
  c.psi0 = j.value("psi0", c.psi0);
  c.sigma_pos = j.value("sigma_pos", c.sigma_pos);
  c.sigma_amb = j.value("sigma_amb", c.sigma_amb);
  c.steps = j.value("steps", c.steps);
  c.clamp_margin = j.value("clamp_margin", c.clamp_margin);
  c.normalize_proxy = j.value("normalize_proxy", c.normalize_proxy);
  c.allow_unnormalized = j.value("allow_unnormalized", c.allow_unnormalized);
  return c;
}

json knn_to_json(const KnnConfig& c) { return {{"k", c.k}}; }

KnnConfig knn_from_json(const json& j) {
  KnnConfig c;
  c.k = j.value("k", c.k);
  return c;
}

json kmeans_to_json(const KmeansConfig& c) {
  return {{"clusters", c.clusters},
          {"max_iters", c.max_iters},
          {"seed", c.seed},
          {"tol", c.tol}};
}

KmeansConfig kmeans_from_json(const json& j) {
  KmeansConfig c;
  c.clusters = j.value("clusters", c.clusters);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.seed = j.value("seed", c.seed);
  c.tol = j.value("tol", c.tol);
  return c;
}

json subsample_to_json(const SubsampleSpec& s) {
  return {{"ratio", s.ratio}, {"seed", s.seed}};
}

SubsampleSpec subsample_from_json(const json& j) {
  SubsampleSpec s;
  s.ratio = j.value("ratio", s.ratio);
  s.seed = j.value("seed", s.seed);
  return s;
}

json loss_to_json(const LossConfig& c) {
  return {{"tau", c.tau},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"projection_dim", c.projection_dim},
          {"seed", c.seed},
          {"remine_every_epoch", c.remine_every_epoch}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig c;
  c.tau = j.value("tau", c.tau);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  c.seed = j.value("seed", c.seed);
  c.remine_every_epoch = j.value("remine_every_epoch", c.remine_every_epoch);
  return c;
}

// ---------------------------------------------------------------------------
// TOML section parsers

const std::set<std::string> kPpapKeys = {"phi0",  "psi0",         "sigma_pos",
                                         "sigma_amb", "steps",    "clamp_margin",
                                         "normalize_proxy",       "allow_unnormalized"};

MiningConfig ppap_section(const toml::Table& table, const std::string& what) {
  reject_unknown(table, kPpapKeys, what);
  MiningConfig c;
  c.phi0 = num_field(table, "phi0", c.phi0, what);
  c.psi0 = num_field(table, "psi0", c.psi0, what);
  c.sigma_pos = num_field(table, "sigma_pos", c.sigma_pos, what);
  c.sigma_amb = num_field(table, "sigma_amb", c.sigma_amb, what);
  const int64_t steps = int_field(table, "steps", c.steps, what);
  if (steps < 0) raise(ErrorKind::ConfigInvalid, what + ": steps must be >= 0");
  c.steps = static_cast<uint32_t>(steps);
  c.clamp_margin = num_field(table, "clamp_margin", c.clamp_margin, what);
  c.normalize_proxy = bool_field(table, "normalize_proxy", c.normalize_proxy, what);
  c.allow_unnormalized = bool_field(table, "allow_unnormalized", c.allow_unnormalized, what);
  return c;
}

KnnConfig knn_section(const toml::Table& table, const std::string& what) {
  reject_unknown(table, {"k"}, what);
  KnnConfig c;
  const int64_t k = int_field(table, "k", c.k, what);
  if (k < 1) raise(ErrorKind::ConfigInvalid, what + ": k must be >= 1");
  c.k = static_cast<uint32_t>(k);
  return c;
}

KmeansConfig kmeans_section(const toml::Table& table, const std::string& what) {
  reject_unknown(table, {"clusters", "max_iters", "seed", "tol"}, what);
  KmeansConfig c;
  const int64_t clusters = int_field(table, "clusters", c.clusters, what);
  if (clusters < 1) raise(ErrorKind::ConfigInvalid, what + ": clusters must be >= 1");
  c.clusters = static_cast<uint32_t>(clusters);
  const int64_t iters = int_field(table, "max_iters", c.max_iters, what);
  if (iters < 1) raise(ErrorKind::ConfigInvalid, what + ": max_iters must be >= 1");
  c.max_iters = static_cast<uint32_t>(iters);
  c.seed = seed_field(table, "seed", c.seed, what);
  c.tol = num_field(table, "tol", c.tol, what);
  if (!(c.tol >= 0.0)) raise(ErrorKind::ConfigInvalid, what + ": tol must be >= 0");
  return c;
}

SubsampleSpec subsample_section(const toml::Table& table, const std::string& what) {
  reject_unknown(table, {"ratio", "seed"}, what);
  SubsampleSpec s;
  s.ratio = num_field(table, "ratio", s.ratio, what);
  if (!(s.ratio > 0.0) || s.ratio > 1.0) {
    raise(ErrorKind::ConfigInvalid, what + ": ratio must lie in (0, 1]");
  }
  s.seed = seed_field(table, "seed", s.seed, what);
  return s;
}

const std::set<std::string> kLossKeys = {"tau",   "learning_rate", "epochs",
                                         "projection_dim", "seed", "remine_every_epoch"};

LossConfig loss_section(const toml::Table& table, const std::string& what) {
  reject_unknown(table, kLossKeys, what);
  LossConfig c;
  c.tau = num_field(table, "tau", c.tau, what);
  c.learning_rate = num_field(table, "learning_rate", c.learning_rate, what);
  const int64_t epochs = int_field(table, "epochs", c.epochs, what);
  if (epochs < 0) raise(ErrorKind::ConfigInvalid, what + ": epochs must be >= 0");
  c.epochs = static_cast<uint32_t>(epochs);
  const int64_t pdim = int_field(table, "projection_dim", c.projection_dim, what);
  if (pdim < 1) raise(ErrorKind::ConfigInvalid, what + ": projection_dim must be >= 1");
  c.projection_dim = static_cast<uint32_t>(pdim);
  c.seed = seed_field(table, "seed", c.seed, what);
  c.remine_every_epoch = bool_field(table, "remine_every_epoch", c.remine_every_epoch, what);
  return c;
}

// ---------------------------------------------------------------------------
// plan execution

struct ExecResult {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  uint64_t seed = 0;
};

void save_result_file(const MiningResult& result, const fs::path& out) {
  ensure_parent(out);
  if (out.extension() == ".json") {
    save_mining_json(result, out);
  } else {
    save_mining_binary(result, out);
  }
}

// Rows and labels seen by the miner: either the subsampled view recorded in
// the result or the batch itself.
void local_view(const FeatureBatch& batch, const MiningResult& result,
                Matrix& rows_out, std::vector<uint32_t>& labels_out) {
  if (result.source_indices) {
    const auto& src = *result.source_indices;
    rows_out = Matrix(src.size(), batch.dim());
    labels_out.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] >= batch.n()) {
        raise(ErrorKind::DimensionMismatch,
              "source index " + std::to_string(src[i]) + " outside the feature batch");
      }
      const double* from = batch.data.row(src[i]);
      std::copy(from, from + batch.dim(), rows_out.row(i));
      labels_out[i] = (*batch.labels)[src[i]];
    }
  } else {
    if (result.n != batch.n()) {
      raise(ErrorKind::DimensionMismatch,
            "mining result covers " + std::to_string(result.n) + " rows, batch has " +
                std::to_string(batch.n()));
    }
    rows_out = batch.data;
    labels_out = *batch.labels;
  }
}

FeatureBatch batch_for_result(const FeatureBatch& batch, const MiningResult& result) {
  if (!result.source_indices) {
    if (result.n != batch.n()) {
      raise(ErrorKind::DimensionMismatch,
            "mining result covers " + std::to_string(result.n) + " rows, batch has " +
                std::to_string(batch.n()));
    }
    return batch;
  }
  const auto& src = *result.source_indices;
  FeatureBatch local;
  local.data = Matrix(src.size(), batch.dim());
  local.normalized = batch.normalized;
  local.float_width = batch.float_width;
  if (batch.labels) local.labels = std::vector<uint32_t>(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] >= batch.n()) {
      raise(ErrorKind::DimensionMismatch,
            "source index " + std::to_string(src[i]) + " outside the feature batch");
    }
    const double* from = batch.data.row(src[i]);
    std::copy(from, from + batch.dim(), local.data.row(i));
    if (batch.labels) (*local.labels)[i] = (*batch.labels)[src[i]];
  }
  return local;
}

MiningConfig mining_config_from_params(const std::map<std::string, double>& params) {
  MiningConfig c;
  auto pick = [&](const char* key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  c.phi0 = pick("phi0", c.phi0);
  c.psi0 = pick("psi0", c.psi0);
  c.sigma_pos = pick("sigma_pos", c.sigma_pos);
  c.sigma_amb = pick("sigma_amb", c.sigma_amb);
  c.steps = static_cast<uint32_t>(pick("steps", c.steps));
  c.clamp_margin = pick("clamp_margin", c.clamp_margin);
  c.normalize_proxy = pick("normalize_proxy", 1.0) != 0.0;
  return c;
}

ExecResult exec_generate(const json& plan) {
  const MixtureSpec spec =
      mixture_spec_from_json_string(plan.at("spec").dump(), "manifest plan");
  FeatureBatch batch = sample_mixture(spec);
  if (plan.value("float32", false)) batch = as_float32(batch);
  const std::string out = plan.at("out");
  ensure_parent(out);
  save_batch(batch, out);

  ExecResult r;
  if (plan.contains("spec_path")) r.inputs.push_back(plan["spec_path"]);
  r.outputs = {out};
  r.seed = spec.seed;
  return r;
}

ExecResult exec_mine(const json& plan) {
  const std::string features_path = plan.at("features");
  FeatureBatch batch = load_batch(features_path);

  ExecResult r;
  r.inputs.push_back(features_path);
  if (plan.contains("config_path")) r.inputs.push_back(plan["config_path"]);

  std::optional<std::vector<uint32_t>> src;
  if (plan.contains("subsample")) {
    const SubsampleSpec sub = subsample_from_json(plan["subsample"]);
    r.seed = sub.seed;
    auto [small, idx] = subsample(batch, sub);
    batch = std::move(small);
    src = std::move(idx);
  }

  const std::string strategy = plan.at("strategy");
  const unsigned threads = plan.value("threads", 0u);
  MiningResult result;
  if (strategy == "ppap") {
    result = mine(batch, mining_from_json(plan.at("ppap")), std::nullopt, threads);
  } else if (strategy == "knn") {
    result = mine_knn(batch, knn_from_json(plan.at("knn")));
  } else if (strategy == "kmeans") {
    const KmeansConfig kc = kmeans_from_json(plan.at("kmeans"));
    if (!plan.contains("subsample")) r.seed = kc.seed;
    result = mine_kmeans(batch, kc);
  } else {
    raise(ErrorKind::ConfigInvalid, "unknown strategy '" + strategy + "'");
  }
  result.source_indices = std::move(src);

  const std::string out = plan.at("out");
  save_result_file(result, out);
  r.outputs = {out};
  return r;
}

ExecResult exec_train(const json& plan) {
  const std::string features_path = plan.at("features");
  const std::string mining_path = plan.at("mining");
  const FeatureBatch batch = load_batch(features_path);
  const MiningResult result = load_mining(mining_path);
  const FeatureBatch local = batch_for_result(batch, result);
  const LossConfig cfg = loss_from_json(plan.at("loss"));
  validate_loss_config(cfg);

  ReminerFn reminer = nullptr;
  if (cfg.remine_every_epoch) {
    if (result.strategy != "ppap") {
      raise(ErrorKind::ConfigInvalid,
            "remine_every_epoch needs anchor-propagation mining parameters, got strategy '" +
                result.strategy + "'");
    }
    const MiningConfig remine_cfg = mining_config_from_params(result.params);
    reminer = [remine_cfg](const Matrix& z) {
      FeatureBatch zb;
      zb.data = z;
      zb.normalized = true;
      return mine(zb, remine_cfg);
    };
  }

  const ProjectionState state = train_projection(local, result, cfg, reminer);

  const fs::path out_dir = std::string(plan.at("out_dir"));
  ensure_dir(out_dir);
  const fs::path weight_path = out_dir / "projection.ppft";
  FeatureBatch weights;
  weights.data = state.weight;
  weights.normalized = false;
  save_batch(weights, weight_path);

  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < state.loss_history.size(); ++e) {
    csv += std::to_string(e) + ',' + fmt_double(state.loss_history[e]) + '\n';
  }
  const fs::path history_path = out_dir / "loss_history.csv";
  write_text(history_path, csv);

  ExecResult r;
  r.inputs = {features_path, mining_path};
  if (plan.contains("config_path")) r.inputs.push_back(plan["config_path"]);
  r.outputs = {weight_path.string(), history_path.string()};
  r.seed = cfg.seed;
  return r;
}

ExecResult exec_eval(const json& plan) {
  const std::string features_path = plan.at("features");
  const std::string mining_path = plan.at("mining");
  const FeatureBatch batch = load_batch(features_path);
  const MiningResult result = load_mining(mining_path);
  if (!batch.has_labels()) {
    raise(ErrorKind::MissingLabels, "eval needs labels in the feature container");
  }

  Matrix rows;
  std::vector<uint32_t> labels;
  local_view(batch, result, rows, labels);

  const std::set<std::string> reports(plan.at("reports").begin(), plan.at("reports").end());
  const fs::path out_dir = std::string(plan.at("out_dir"));
  ensure_dir(out_dir);

  ExecResult r;
  r.inputs = {features_path, mining_path};
  r.seed = plan.value("kmeans_seed", 0ull);
  auto emit = [&](const fs::path& path) { r.outputs.push_back(path.string()); };

  if (reports.count("trust")) {
    const TrustReport trust = trust_report(result, labels);
    write_trust_json(trust, out_dir / "trust.json");
    write_trust_csv(trust, out_dir / "trust.csv");
    emit(out_dir / "trust.json");
    emit(out_dir / "trust.csv");
  }
  if (reports.count("curve")) {
    const std::vector<double> grid = plan.contains("quantiles")
                                         ? plan["quantiles"].get<std::vector<double>>()
                                         : default_quantile_grid();
    const CurveReport curve = curve_report(result, labels, grid);
    write_curve_json(curve, out_dir / "curve.json");
    write_curve_csv(curve, out_dir / "curve.csv");
    emit(out_dir / "curve.json");
    emit(out_dir / "curve.csv");
  }
  if (reports.count("bands")) {
    const BandReport bands = frequency_breakdown(result, labels);
    write_bands_json(bands, out_dir / "bands.json");
    write_bands_csv(bands, out_dir / "bands.csv");
    emit(out_dir / "bands.json");
    emit(out_dir / "bands.csv");
  }
  if (reports.count("cluster")) {
    Matrix cluster_rows = rows;
    bool rows_unit = batch.normalized;
    if (plan.contains("projection")) {
      const std::string proj_path = plan["projection"];
      const FeatureBatch weights = load_batch(proj_path);
      if (weights.data.rows != rows.cols) {
        raise(ErrorKind::DimensionMismatch,
              "projection expects " + std::to_string(weights.data.rows) +
                  "-dim rows, features have " + std::to_string(rows.cols));
      }
      cluster_rows = project(rows, weights.data);
      rows_unit = true;
      r.inputs.push_back(proj_path);
    }

    uint32_t clusters = plan.value("clusters", 0u);
    uint32_t max_label = 0;
    std::set<uint32_t> distinct;
    for (uint32_t y : labels) {
      distinct.insert(y);
      max_label = std::max(max_label, y);
    }
    if (clusters == 0) clusters = static_cast<uint32_t>(distinct.size());

    FeatureBatch view;
    view.data = std::move(cluster_rows);
    view.normalized = rows_unit;
    KmeansConfig kc;
    kc.clusters = clusters;
    kc.seed = plan.value("kmeans_seed", 0ull);
    const std::vector<uint32_t> assignment = kmeans_assign(view, kc);

    const uint32_t classes = std::max(max_label, clusters - 1) + 1;
    const ClusterReport cluster = hungarian_match(assignment, labels, classes);
    write_cluster_json(cluster, out_dir / "cluster.json");
    write_cluster_csv(cluster, out_dir / "cluster.csv");
    emit(out_dir / "cluster.json");
    emit(out_dir / "cluster.csv");
  }
  return r;
}

// Canonical sweep axis order; the rightmost listed field varies fastest.
const std::vector<std::string> kSweepFields = {"phi0",      "psi0",  "sigma_pos",
                                               "sigma_amb", "steps", "clamp_margin"};

void apply_sweep_value(MiningConfig& cfg, const std::string& field, const json& value) {
  if (field == "phi0") cfg.phi0 = value.get<double>();
  else if (field == "psi0") cfg.psi0 = value.get<double>();
  else if (field == "sigma_pos") cfg.sigma_pos = value.get<double>();
  else if (field == "sigma_amb") cfg.sigma_amb = value.get<double>();
  else if (field == "steps") cfg.steps = value.get<uint32_t>();
  else if (field == "clamp_margin") cfg.clamp_margin = value.get<double>();
  else raise(ErrorKind::ConfigInvalid, "unknown sweep field '" + field + "'");
}

double sweep_value_of(const MiningConfig& cfg, const std::string& field) {
  if (field == "phi0") return cfg.phi0;
  if (field == "psi0") return cfg.psi0;
  if (field == "sigma_pos") return cfg.sigma_pos;
  if (field == "sigma_amb") return cfg.sigma_amb;
  if (field == "steps") return cfg.steps;
  return cfg.clamp_margin;
}

std::string run_dir_name(std::size_t point) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", point);
  return buf;
}

ExecResult exec_sweep(const json& plan) {
  const std::string features_path = plan.at("features");
  FeatureBatch batch = load_batch(features_path);
  if (!batch.has_labels()) {
    raise(ErrorKind::MissingLabels, "sweep needs labels to score each grid point");
  }

  ExecResult r;
  r.inputs.push_back(features_path);
  if (plan.contains("config_path")) r.inputs.push_back(plan["config_path"]);

  std::optional<std::vector<uint32_t>> src;
  if (plan.contains("subsample")) {
    const SubsampleSpec sub = subsample_from_json(plan["subsample"]);
    r.seed = sub.seed;
    auto [small, idx] = subsample(batch, sub);
    batch = std::move(small);
    src = std::move(idx);
  }
  const std::vector<uint32_t>& labels = *batch.labels;

  const MiningConfig base = mining_from_json(plan.at("base"));
  const unsigned threads = plan.value("threads", 0u);

  // Active axes in canonical order.
  std::vector<std::string> fields;
  std::vector<std::vector<json>> values;
  const json& grid = plan.at("grid");
  for (const std::string& field : kSweepFields) {
    if (!grid.contains(field)) continue;
    fields.push_back(field);
    values.emplace_back(grid[field].begin(), grid[field].end());
    if (values.back().empty()) {
      raise(ErrorKind::ConfigInvalid, "sweep grid axis '" + field + "' is empty");
    }
  }
  if (fields.empty()) raise(ErrorKind::ConfigInvalid, "sweep grid has no axes");

  std::size_t points = 1;
  for (const auto& axis : values) points *= axis.size();

  const bool with_train = plan.contains("train");
  const bool with_cluster = plan.contains("cluster");
  const fs::path out_dir = std::string(plan.at("out_dir"));
  ensure_dir(out_dir);

  std::string csv =
      "point,phi0,psi0,sigma_pos,sigma_amb,steps,clamp_margin,"
      "mean_positive_count,tp_in_p_ratio,mean_negative_count,fp_in_n_ratio,"
      "anchor_mean_precision";
  if (with_train) csv += ",final_loss";
  if (with_cluster) csv += ",accuracy,miou";
  csv += '\n';

  std::vector<std::size_t> odo(fields.size(), 0);
  for (std::size_t point = 0; point < points; ++point) {
    MiningConfig cfg = base;
    for (std::size_t a = 0; a < fields.size(); ++a) {
      apply_sweep_value(cfg, fields[a], values[a][odo[a]]);
    }

    MiningResult result = mine(batch, cfg, std::nullopt, threads);
    result.source_indices = src;

    const fs::path run_dir = out_dir / run_dir_name(point);
    ensure_dir(run_dir);
    const fs::path result_path = run_dir / "result.json";
    save_mining_json(result, result_path);
    r.outputs.push_back(result_path.string());

    const TrustReport trust = trust_report(result, labels);

    csv += std::to_string(point);
    for (const std::string& field : kSweepFields) {
      csv += ',' + fmt_double(sweep_value_of(cfg, field));
    }
    csv += ',' + fmt_double(trust.mean_positive_count);
    csv += ',' + fmt_double(trust.tp_in_p_ratio);
    csv += ',' + fmt_double(trust.mean_negative_count);
    csv += ',' + fmt_double(trust.fp_in_n_ratio);
    csv += ',' + fmt_double(trust.anchor_mean_precision);

    std::optional<Matrix> projected;
    if (with_train) {
      const LossConfig loss_cfg = loss_from_json(plan["train"]);
      const ProjectionState state = train_projection(batch, result, loss_cfg);
      csv += ',' + fmt_double(state.loss_history.back());
      projected = project(batch.data, state.weight);
    }
    if (with_cluster) {
      const json& cj = plan["cluster"];
      uint32_t clusters = cj.value("clusters", 0u);
      uint32_t max_label = 0;
      std::set<uint32_t> distinct;
      for (uint32_t y : labels) {
        distinct.insert(y);
        max_label = std::max(max_label, y);
      }
      if (clusters == 0) clusters = static_cast<uint32_t>(distinct.size());

      FeatureBatch view;
      view.data = projected ? *projected : batch.data;
      view.normalized = projected ? true : batch.normalized;
      KmeansConfig kc;
      kc.clusters = clusters;
      kc.seed = cj.value("seed", 0ull);
      const std::vector<uint32_t> assignment = kmeans_assign(view, kc);
      const uint32_t classes = std::max(max_label, clusters - 1) + 1;
      const ClusterReport cluster = hungarian_match(assignment, labels, classes);
      csv += ',' + fmt_double(cluster.accuracy);
      csv += ',' + fmt_double(cluster.miou);
    }
    csv += '\n';

    for (std::size_t a = fields.size(); a-- > 0;) {
      if (++odo[a] < values[a].size()) break;
      odo[a] = 0;
    }
  }

  const fs::path csv_path = out_dir / "sweep.csv";
  write_text(csv_path, csv);
  r.outputs.push_back(csv_path.string());
  return r;
}

ExecResult execute_plan(const json& plan) {
  const std::string sub = plan.at("subcommand");
  if (sub == "generate") return exec_generate(plan);
  if (sub == "mine") return exec_mine(plan);
  if (sub == "train") return exec_train(plan);
  if (sub == "eval") return exec_eval(plan);
  if (sub == "sweep") return exec_sweep(plan);
  raise(ErrorKind::ConfigInvalid, "plan names unknown subcommand '" + sub + "'");
}

fs::path manifest_path_for(const json& plan) {
  const std::string sub = plan.at("subcommand");
  if (sub == "generate" || sub == "mine") {
    return fs::path(std::string(plan.at("out")) + ".manifest.json");
  }
  return fs::path(std::string(plan.at("out_dir"))) / "manifest.json";
}

int run_plan(const json& plan) {
  const auto start = std::chrono::steady_clock::now();
  const ExecResult result = execute_plan(plan);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  RunManifest manifest;
  manifest.subcommand = plan.at("subcommand");
  manifest.seed = result.seed;
  manifest.inputs = result.inputs;
  manifest.outputs = result.outputs;
  manifest.duration_seconds = elapsed.count();
  manifest.version = kVersion;
  manifest.plan = plan;

  const fs::path manifest_path = manifest_path_for(plan);
  ensure_parent(manifest_path);
  save_manifest(manifest, manifest_path);
  return 0;
}

// ---------------------------------------------------------------------------
// subcommand front ends: parse flags + config into a fully resolved plan

int cmd_generate(const std::string& spec_path, const std::string& out, bool float32,
                 const std::optional<uint64_t>& seed_override) {
  MixtureSpec spec = load_mixture_spec(spec_path);
  if (seed_override) spec.seed = *seed_override;

  json plan;
  plan["subcommand"] = "generate";
  plan["spec"] = json::parse(mixture_spec_to_json_string(spec));
  plan["spec_path"] = spec_path;
  plan["out"] = out;
  plan["float32"] = float32;
  return run_plan(plan);
}

struct MineOverrides {
  std::optional<double> phi0, psi0, sigma_pos, sigma_amb, clamp_margin;
  std::optional<int64_t> steps, k, clusters;
};

int cmd_mine(const std::string& features, const std::string& config_path,
             const std::string& strategy, const std::string& out, unsigned threads,
             const MineOverrides& ov) {
  json plan;
  plan["subcommand"] = "mine";
  plan["features"] = features;
  plan["strategy"] = strategy;
  plan["threads"] = threads;
  plan["out"] = out;

  MiningConfig mcfg;
  KnnConfig kcfg;
  KmeansConfig kmcfg;
  std::optional<SubsampleSpec> sub;

  if (!config_path.empty()) {
    const toml::Value root = toml::parse_file(config_path);
    const toml::Table& table = as_table(root, config_path);
    reject_unknown(table, {strategy, "subsample"},
                   config_path + " (strategy " + strategy + ")");
    if (const auto it = table.find(strategy); it != table.end()) {
      const toml::Table& section = as_table(it->second, config_path + ": [" + strategy + "]");
      const std::string what = config_path + ": [" + strategy + "]";
      if (strategy == "ppap") mcfg = ppap_section(section, what);
      else if (strategy == "knn") kcfg = knn_section(section, what);
      else kmcfg = kmeans_section(section, what);
    }
    if (const auto it = table.find("subsample"); it != table.end()) {
      sub = subsample_section(as_table(it->second, config_path + ": [subsample]"),
                              config_path + ": [subsample]");
    }
    plan["config_path"] = config_path;
  }

  if (ov.phi0) mcfg.phi0 = *ov.phi0;
  if (ov.psi0) mcfg.psi0 = *ov.psi0;
  if (ov.sigma_pos) mcfg.sigma_pos = *ov.sigma_pos;
  if (ov.sigma_amb) mcfg.sigma_amb = *ov.sigma_amb;
  if (ov.clamp_margin) mcfg.clamp_margin = *ov.clamp_margin;
  if (ov.steps) {
    if (*ov.steps < 0) raise(ErrorKind::ConfigInvalid, "--steps must be >= 0");
    mcfg.steps = static_cast<uint32_t>(*ov.steps);
  }
  if (ov.k) {
    if (*ov.k < 1) raise(ErrorKind::ConfigInvalid, "--k must be >= 1");
    kcfg.k = static_cast<uint32_t>(*ov.k);
  }
  if (ov.clusters) {
    if (*ov.clusters < 1) raise(ErrorKind::ConfigInvalid, "--clusters must be >= 1");
    kmcfg.clusters = static_cast<uint32_t>(*ov.clusters);
  }

  if (strategy == "ppap") {
    validate_config(mcfg);
    plan["ppap"] = mining_to_json(mcfg);
  } else if (strategy == "knn") {
    plan["knn"] = knn_to_json(kcfg);
  } else {
    plan["kmeans"] = kmeans_to_json(kmcfg);
  }
  if (sub) plan["subsample"] = subsample_to_json(*sub);
  return run_plan(plan);
}

struct TrainOverrides {
  std::optional<double> tau, learning_rate;
  std::optional<int64_t> epochs, projection_dim;
  std::optional<uint64_t> seed;
};

int cmd_train(const std::string& features, const std::string& mining,
              const std::string& config_path, const std::string& out_dir,
              const TrainOverrides& ov) {
  LossConfig cfg;
  json plan;
  plan["subcommand"] = "train";
  plan["features"] = features;
  plan["mining"] = mining;
  plan["out_dir"] = out_dir;

  if (!config_path.empty()) {
    const toml::Value root = toml::parse_file(config_path);
    cfg = loss_section(as_table(root, config_path), config_path);
    plan["config_path"] = config_path;
  }
  if (ov.tau) cfg.tau = *ov.tau;
  if (ov.learning_rate) cfg.learning_rate = *ov.learning_rate;
  if (ov.epochs) {
    if (*ov.epochs < 0) raise(ErrorKind::ConfigInvalid, "--epochs must be >= 0");
    cfg.epochs = static_cast<uint32_t>(*ov.epochs);
  }
  if (ov.projection_dim) {
    if (*ov.projection_dim < 1) {
      raise(ErrorKind::ConfigInvalid, "--projection-dim must be >= 1");
    }
    cfg.projection_dim = static_cast<uint32_t>(*ov.projection_dim);
  }
  if (ov.seed) cfg.seed = *ov.seed;
  validate_loss_config(cfg);

  plan["loss"] = loss_to_json(cfg);
  return run_plan(plan);
}

int cmd_eval(const std::string& features, const std::string& mining,
             const std::string& out_dir, const std::vector<std::string>& reports,
             const std::vector<double>& quantiles, uint32_t clusters, uint64_t kmeans_seed,
             const std::string& projection) {
  json plan;
  plan["subcommand"] = "eval";
  plan["features"] = features;
  plan["mining"] = mining;
  plan["out_dir"] = out_dir;
  plan["reports"] = reports;
  if (!quantiles.empty()) plan["quantiles"] = quantiles;
  plan["clusters"] = clusters;
  plan["kmeans_seed"] = kmeans_seed;
  if (!projection.empty()) plan["projection"] = projection;
  return run_plan(plan);
}

int cmd_sweep(const std::string& features, const std::string& config_path,
              const std::string& out_dir, unsigned threads) {
  const toml::Value root = toml::parse_file(config_path);
  const toml::Table& table = as_table(root, config_path);
  reject_unknown(table, {"base", "grid", "subsample", "train", "cluster"}, config_path);

  json plan;
  plan["subcommand"] = "sweep";
  plan["features"] = features;
  plan["out_dir"] = out_dir;
  plan["threads"] = threads;
  plan["config_path"] = config_path;

  MiningConfig base;
  if (const auto it = table.find("base"); it != table.end()) {
    base = ppap_section(as_table(it->second, config_path + ": [base]"),
                        config_path + ": [base]");
  }
  plan["base"] = mining_to_json(base);

  const auto grid_it = table.find("grid");
  if (grid_it == table.end()) {
    raise(ErrorKind::ConfigInvalid, config_path + ": missing [grid] section");
  }
  const toml::Table& grid = as_table(grid_it->second, config_path + ": [grid]");
  reject_unknown(grid, {kSweepFields.begin(), kSweepFields.end()},
                 config_path + ": [grid]");
  json grid_json = json::object();
  for (const auto& [field, value] : grid) {
    if (!value.is_array() || value.as_array().empty()) {
      raise(ErrorKind::ConfigInvalid,
            config_path + ": [grid] " + field + " must be a non-empty array");
    }
    json axis = json::array();
    for (const toml::Value& entry : value.as_array()) {
      if (field == "steps") {
        if (!entry.is_int() || entry.as_int() < 0) {
          raise(ErrorKind::ConfigInvalid,
                config_path + ": [grid] steps entries must be integers >= 0");
        }
        axis.push_back(entry.as_int());
      } else {
        if (!entry.is_number()) {
          raise(ErrorKind::ConfigInvalid,
                config_path + ": [grid] " + field + " entries must be numbers");
        }
        axis.push_back(entry.as_double());
      }
    }
    grid_json[field] = std::move(axis);
  }
  plan["grid"] = std::move(grid_json);

  if (const auto it = table.find("subsample"); it != table.end()) {
    plan["subsample"] = subsample_to_json(
        subsample_section(as_table(it->second, config_path + ": [subsample]"),
                          config_path + ": [subsample]"));
  }
  if (const auto it = table.find("train"); it != table.end()) {
    const LossConfig loss = loss_section(as_table(it->second, config_path + ": [train]"),
                                         config_path + ": [train]");
    validate_loss_config(loss);
    plan["train"] = loss_to_json(loss);
  }
  if (const auto it = table.find("cluster"); it != table.end()) {
    const toml::Table& section = as_table(it->second, config_path + ": [cluster]");
    reject_unknown(section, {"clusters", "seed"}, config_path + ": [cluster]");
    const int64_t clusters =
        int_field(section, "clusters", 0, config_path + ": [cluster]");
    if (clusters < 0) {
      raise(ErrorKind::ConfigInvalid, config_path + ": [cluster] clusters must be >= 0");
    }
    plan["cluster"] = {
        {"clusters", static_cast<uint32_t>(clusters)},
        {"seed", seed_field(section, "seed", 0, config_path + ": [cluster]")}};
  }
  return run_plan(plan);
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const RunManifest manifest = load_manifest(manifest_path);
  json plan = manifest.plan;
  if (!plan.is_object() || !plan.contains("subcommand")) {
    raise(ErrorKind::MalformedHeader, manifest_path + ": manifest has no executable plan");
  }
  if (!out_dir.empty()) {
    const std::string sub = plan.at("subcommand");
    if (sub == "generate" || sub == "mine") {
      const fs::path original(std::string(plan.at("out")));
      plan["out"] = (fs::path(out_dir) / original.filename()).string();
    } else {
      plan["out_dir"] = out_dir;
    }
  }
  return run_plan(plan);
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"anchor-propagation pseudo-supervision miner"};
  app.name("ppap");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  int rc = 0;

  // generate
  auto* gen = app.add_subcommand("generate", "sample a synthetic feature batch");
  std::string gen_spec, gen_out;
  bool gen_f32 = false;
  uint64_t gen_seed = 0;
  gen->add_option("--spec", gen_spec, "mixture spec file, TOML or JSON")->required();
  gen->add_option("--out", gen_out, "output feature container")->required();
  gen->add_flag("--float32", gen_f32, "store rows at 32-bit width");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override the spec seed");
  gen->callback([&] {
    rc = cmd_generate(gen_spec, gen_out, gen_f32,
                      gen_seed_opt->count() ? std::optional<uint64_t>(gen_seed)
                                            : std::nullopt);
  });

  // mine
  auto* mi = app.add_subcommand("mine", "mine per-anchor positive/ambiguous/negative sets");
  std::string mi_features, mi_config, mi_strategy, mi_out;
  unsigned mi_threads = 0;
  MineOverrides mi_ov;
  double mi_phi0 = 0, mi_psi0 = 0, mi_sp = 0, mi_sa = 0, mi_margin = 0;
  int64_t mi_steps = 0, mi_k = 0, mi_clusters = 0;
  mi->add_option("--features", mi_features, "feature container")->required();
  mi->add_option("--config", mi_config, "TOML mining config");
  mi->add_option("--strategy", mi_strategy, "ppap, knn, or kmeans")
      ->required()
      ->check(CLI::IsMember({"ppap", "knn", "kmeans"}));
  mi->add_option("--out", mi_out, "mining output, .json or binary")->required();
  mi->add_option("--threads", mi_threads, "worker threads, 0 = auto");
  auto* o_phi0 = mi->add_option("--phi0", mi_phi0, "override phi0");
  auto* o_psi0 = mi->add_option("--psi0", mi_psi0, "override psi0");
  auto* o_sp = mi->add_option("--sigma-pos", mi_sp, "override sigma_pos");
  auto* o_sa = mi->add_option("--sigma-amb", mi_sa, "override sigma_amb");
  auto* o_steps = mi->add_option("--steps", mi_steps, "override step count");
  auto* o_margin = mi->add_option("--clamp-margin", mi_margin, "override clamp margin");
  auto* o_k = mi->add_option("--k", mi_k, "override knn k");
  auto* o_clusters = mi->add_option("--clusters", mi_clusters, "override kmeans clusters");
  mi->callback([&] {
    if (o_phi0->count()) mi_ov.phi0 = mi_phi0;
    if (o_psi0->count()) mi_ov.psi0 = mi_psi0;
    if (o_sp->count()) mi_ov.sigma_pos = mi_sp;
    if (o_sa->count()) mi_ov.sigma_amb = mi_sa;
    if (o_steps->count()) mi_ov.steps = mi_steps;
    if (o_margin->count()) mi_ov.clamp_margin = mi_margin;
    if (o_k->count()) mi_ov.k = mi_k;
    if (o_clusters->count()) mi_ov.clusters = mi_clusters;
    rc = cmd_mine(mi_features, mi_config, mi_strategy, mi_out, mi_threads, mi_ov);
  });

  // train
  auto* tr = app.add_subcommand("train", "fit a linear projection on mined sets");
  std::string tr_features, tr_mining, tr_config, tr_out_dir;
  TrainOverrides tr_ov;
  double tr_tau = 0, tr_lr = 0;
  int64_t tr_epochs = 0, tr_pdim = 0;
  uint64_t tr_seed = 0;
  tr->add_option("--features", tr_features, "feature container")->required();
  tr->add_option("--mining", tr_mining, "mining result file")->required();
  tr->add_option("--config", tr_config, "TOML training config");
  tr->add_option("--out-dir", tr_out_dir, "output directory")->required();
  auto* t_tau = tr->add_option("--tau", tr_tau, "override temperature");
  auto* t_lr = tr->add_option("--learning-rate", tr_lr, "override learning rate");
  auto* t_epochs = tr->add_option("--epochs", tr_epochs, "override epoch count");
  auto* t_pdim = tr->add_option("--projection-dim", tr_pdim, "override projection width");
  auto* t_seed = tr->add_option("--seed", tr_seed, "override init seed");
  tr->callback([&] {
    if (t_tau->count()) tr_ov.tau = tr_tau;
    if (t_lr->count()) tr_ov.learning_rate = tr_lr;
    if (t_epochs->count()) tr_ov.epochs = tr_epochs;
    if (t_pdim->count()) tr_ov.projection_dim = tr_pdim;
    if (t_seed->count()) tr_ov.seed = tr_seed;
    rc = cmd_train(tr_features, tr_mining, tr_config, tr_out_dir, tr_ov);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "score mined sets against labels");
  std::string ev_features, ev_mining, ev_out_dir, ev_projection;
  bool ev_trust = false, ev_curve = false, ev_cluster = false, ev_bands = false;
  std::vector<double> ev_quantiles;
  uint32_t ev_clusters = 0;
  uint64_t ev_kseed = 0;
  ev->add_option("--features", ev_features, "labeled feature container")->required();
  ev->add_option("--mining", ev_mining, "mining result file")->required();
  ev->add_option("--out-dir", ev_out_dir, "report directory")->required();
  ev->add_flag("--trust", ev_trust, "trust report");
  ev->add_flag("--curve", ev_curve, "quantile curve report");
  ev->add_flag("--cluster", ev_cluster, "clustering report");
  ev->add_flag("--bands", ev_bands, "frequency-band report");
  ev->add_option("--quantiles", ev_quantiles, "curve grid, percentages in (0, 100]")
      ->delimiter(',');
  ev->add_option("--clusters", ev_clusters, "cluster count, 0 = label count");
  ev->add_option("--kmeans-seed", ev_kseed, "seed for the clustering report");
  ev->add_option("--projection", ev_projection, "projection weights to apply first");
  ev->callback([&] {
    std::vector<std::string> reports;
    if (ev_trust) reports.push_back("trust");
    if (ev_curve) reports.push_back("curve");
    if (ev_cluster) reports.push_back("cluster");
    if (ev_bands) reports.push_back("bands");
    if (reports.empty()) reports = {"trust", "curve", "cluster", "bands"};
    rc = cmd_eval(ev_features, ev_mining, ev_out_dir, reports, ev_quantiles, ev_clusters,
                  ev_kseed, ev_projection);
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid-scan mining parameters");
  std::string sw_features, sw_config, sw_out_dir;
  unsigned sw_threads = 0;
  sw->add_option("--features", sw_features, "labeled feature container")->required();
  sw->add_option("--config", sw_config, "TOML sweep config with [grid]")->required();
  sw->add_option("--out-dir", sw_out_dir, "output directory")->required();
  sw->add_option("--threads", sw_threads, "worker threads, 0 = auto");
  sw->callback([&] { rc = cmd_sweep(sw_features, sw_config, sw_out_dir, sw_threads); });

  // rerun
  auto* rr = app.add_subcommand("rerun", "re-execute a recorded run manifest");
  std::string rr_manifest, rr_out_dir;
  rr->add_option("--manifest", rr_manifest, "manifest produced by a previous run")
      ->required();
  rr->add_option("--out-dir", rr_out_dir, "redirect outputs into this directory");
  rr->callback([&] { rc = cmd_rerun(rr_manifest, rr_out_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "ppap: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ppap: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

}  // namespace ppap::cli
