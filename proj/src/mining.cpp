#include "ppap/mining.hpp"

#include <algorithm>
#include <cmath>

#include "ppap/errors.hpp"
#include "ppap/parallel.hpp"

namespace ppap {

namespace {

// A positive-set mean this small carries no direction; the proxy stays put.
constexpr double kDegenerateMeanNorm = 1e-12;

void check_anchor(const FeatureBatch& batch, std::size_t anchor) {
  if (anchor >= batch.n()) {
    raise(ErrorKind::ConfigInvalid,
          "anchor index " + std::to_string(anchor) + " out of range for n=" +
              std::to_string(batch.n()));
  }
}

void check_normalized(const FeatureBatch& batch, const MiningConfig& config) {
  if (!batch.normalized && !config.allow_unnormalized) {
    raise(ErrorKind::NormalizationMismatch,
          "mining requires unit-norm rows; normalize the batch first");
  }
}

std::vector<uint32_t> gather_above(const std::vector<double>& sims, double threshold) {
  std::vector<uint32_t> out;
  for (std::size_t j = 0; j < sims.size(); ++j) {
    if (sims[j] > threshold) out.push_back(static_cast<uint32_t>(j));
  }
  return out;
}

// Propagation with the final similarity pass left in sims so partitioning can
// reuse it; the values are what row_similarities(v_final) would recompute.
AnchorState propagate_with_sims(const FeatureBatch& batch, std::size_t anchor,
                                const MiningConfig& config, std::vector<double>& sims) {
  const std::size_t dim = batch.dim();
  const double* f_anchor = batch.data.row(anchor);

  AnchorState state;
  state.anchor_index = static_cast<uint32_t>(anchor);
  state.proxy.assign(f_anchor, f_anchor + dim);
  state.phi = config.phi0;
  state.psi = config.psi0;
  state.step = config.steps;

  sims.resize(batch.n());
  row_similarities(batch.data, f_anchor, sims.data());
  state.positives = gather_above(sims, config.phi0);
  if (state.positives.empty()) {
    state.positives.push_back(static_cast<uint32_t>(anchor));
  }

  state.trajectory.resize(config.steps + 1);
  state.trajectory[0] = {state.proxy, config.phi0, config.psi0, config.psi0,
                         l2_norm(f_anchor, dim)};

  std::vector<double> mean(dim);
  for (uint32_t t = 1; t <= config.steps; ++t) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (uint32_t j : state.positives) {
      const double* row = batch.data.row(j);
      for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
    }
    const auto count = static_cast<double>(state.positives.size());
    for (std::size_t d = 0; d < dim; ++d) mean[d] /= count;

    const double mean_norm = l2_norm(mean.data(), dim);
    std::vector<double> v_new;
    if (config.normalize_proxy) {
      if (mean_norm < kDegenerateMeanNorm) {
        v_new = state.proxy;
      } else {
        v_new.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) v_new[d] = mean[d] / mean_norm;
      }
    } else {
      v_new = mean;
    }

    const double sim = dot(state.proxy.data(), v_new.data(), dim);
    state.phi = update_phi(state.phi, sim, config.sigma_pos);
    const double psi_raw = update_psi(state.psi, sim, config.sigma_amb);
    state.psi = std::min(psi_raw, state.phi - config.clamp_margin);
    state.proxy = std::move(v_new);

    row_similarities(batch.data, state.proxy.data(), sims.data());
    state.positives = gather_above(sims, state.phi);
    if (state.positives.empty()) {
      state.positives.push_back(static_cast<uint32_t>(anchor));
    }

    state.trajectory[t] = {state.proxy, state.phi, psi_raw, state.psi, mean_norm};
  }
  return state;
}

Partition partition_from_sims(std::size_t n, const AnchorState& state,
                              const std::vector<double>& sims) {
  if (!(state.psi < state.phi)) {
    raise(ErrorKind::CriterionInversion,
          "anchor " + std::to_string(state.anchor_index) + ": psi " +
              std::to_string(state.psi) + " >= phi " + std::to_string(state.phi));
  }
  Partition part;
  part.positives = state.positives;
  std::size_t p_cursor = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (p_cursor < part.positives.size() && part.positives[p_cursor] == j) {
      ++p_cursor;
      continue;
    }
    if (sims[j] > state.psi && sims[j] < state.phi) {
      part.ambiguous.push_back(static_cast<uint32_t>(j));
    } else {
      part.negatives.push_back(static_cast<uint32_t>(j));
    }
  }
  return part;
}

}  // namespace

void validate_config(const MiningConfig& config) {
  const bool finite = std::isfinite(config.phi0) && std::isfinite(config.psi0) &&
                      std::isfinite(config.sigma_pos) && std::isfinite(config.sigma_amb) &&
                      std::isfinite(config.clamp_margin);
  if (!finite) raise(ErrorKind::ConfigInvalid, "mining config holds a non-finite value");
  if (!(config.psi0 > -1.0) || !(config.phi0 > config.psi0) || !(config.phi0 <= 1.0)) {
    raise(ErrorKind::ConfigInvalid, "require -1 < psi0 < phi0 <= 1");
  }
  if (!(config.sigma_pos > 0.0)) raise(ErrorKind::ConfigInvalid, "sigma_pos must be > 0");
  if (!(config.sigma_amb > 0.0)) raise(ErrorKind::ConfigInvalid, "sigma_amb must be > 0");
  if (!(config.clamp_margin >= 0.0)) {
    raise(ErrorKind::ConfigInvalid, "clamp_margin must be >= 0");
  }
}

std::vector<uint32_t> initial_positives(const FeatureBatch& batch, std::size_t anchor,
                                        double phi0) {
  check_anchor(batch, anchor);
  const auto sims = row_similarities(batch.data, batch.data.row_span(anchor));
  return gather_above(sims, phi0);
}

std::vector<double> relocate_proxy(const FeatureBatch& batch,
                                   const std::vector<uint32_t>& positives,
                                   bool renormalize, double* mean_norm_out) {
  if (positives.empty()) {
    raise(ErrorKind::EmptyPositiveSet, "cannot relocate a proxy over an empty set");
  }
  const std::size_t dim = batch.dim();
  std::vector<double> mean(dim, 0.0);
  for (uint32_t j : positives) {
    check_anchor(batch, j);
    const double* row = batch.data.row(j);
    for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
  }
  const auto count = static_cast<double>(positives.size());
  for (std::size_t d = 0; d < dim; ++d) mean[d] /= count;

  const double mean_norm = l2_norm(mean.data(), dim);
  if (mean_norm_out) *mean_norm_out = mean_norm;
  if (renormalize && mean_norm >= kDegenerateMeanNorm) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] /= mean_norm;
  }
  return mean;
}

double update_phi(double phi_prev, double similarity, double sigma_pos) {
  return phi_prev - (1.0 - similarity) / sigma_pos;
}

double update_psi(double psi_prev, double similarity, double sigma_amb) {
  return psi_prev + (1.0 - similarity) / sigma_amb;
}

double update_phi(double phi_prev, std::span<const double> v_prev,
                  std::span<const double> v_new, double sigma_pos) {
  return update_phi(phi_prev, dot(v_prev, v_new), sigma_pos);
}

double update_psi(double psi_prev, std::span<const double> v_prev,
                  std::span<const double> v_new, double sigma_amb) {
  return update_psi(psi_prev, dot(v_prev, v_new), sigma_amb);
}

AnchorState propagate_anchor(const FeatureBatch& batch, std::size_t anchor,
                             const MiningConfig& config) {
  validate_config(config);
  check_normalized(batch, config);
  check_anchor(batch, anchor);
  std::vector<double> sims;
  return propagate_with_sims(batch, anchor, config, sims);
}

Partition partition_sets(const FeatureBatch& batch, const AnchorState& state) {
  const auto sims = row_similarities(batch.data,
                                     std::span<const double>(state.proxy));
  return partition_from_sims(batch.n(), state, sims);
}

MiningResult mine(const FeatureBatch& batch, const MiningConfig& config,
                  const std::optional<std::vector<uint32_t>>& anchors,
                  unsigned threads) {
  validate_config(config);
  check_normalized(batch, config);
  if (batch.n() == 0) raise(ErrorKind::ConfigInvalid, "cannot mine an empty batch");

  std::vector<uint32_t> anchor_list;
  if (anchors) {
    anchor_list = *anchors;
    for (uint32_t a : anchor_list) check_anchor(batch, a);
  } else {
    anchor_list.resize(batch.n());
    for (std::size_t i = 0; i < anchor_list.size(); ++i) {
      anchor_list[i] = static_cast<uint32_t>(i);
    }
  }

  MiningResult result;
  result.n = static_cast<uint32_t>(batch.n());
  result.strategy = "ppap";
  result.params = {{"phi0", config.phi0},
                   {"psi0", config.psi0},
                   {"sigma_pos", config.sigma_pos},
                   {"sigma_amb", config.sigma_amb},
                   {"steps", static_cast<double>(config.steps)},
                   {"clamp_margin", config.clamp_margin},
                   {"normalize_proxy", config.normalize_proxy ? 1.0 : 0.0}};
  result.anchors.resize(anchor_list.size());

  parallel_for(anchor_list.size(), resolve_threads(threads), [&](std::size_t k) {
    thread_local std::vector<double> sims;
    const uint32_t anchor = anchor_list[k];
    AnchorState state = propagate_with_sims(batch, anchor, config, sims);
    Partition part = partition_from_sims(batch.n(), state, sims);
    AnchorSets& slot = result.anchors[k];
    slot.anchor = anchor;
    slot.positives = std::move(part.positives);
    slot.ambiguous = std::move(part.ambiguous);
    slot.phi = state.phi;
    slot.psi = state.psi;
    slot.proxy_norm = state.trajectory.back().mean_norm;
    slot.steps = config.steps;
  });
  return result;
}

std::vector<uint32_t> MiningResult::negatives_of(std::size_t k) const {
  const AnchorSets& sets = anchors.at(k);
  std::vector<uint32_t> out;
  std::size_t p = 0, a = 0;
  for (uint32_t j = 0; j < n; ++j) {
    if (p < sets.positives.size() && sets.positives[p] == j) {
      ++p;
      continue;
    }
    if (a < sets.ambiguous.size() && sets.ambiguous[a] == j) {
      ++a;
      continue;
    }
    out.push_back(j);
  }
  return out;
}

}  // namespace ppap
