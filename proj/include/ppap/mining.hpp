#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppap/feature_batch.hpp"

namespace ppap {

struct MiningConfig {
  double phi0 = 0.55;
  double psi0 = 0.15;
  double sigma_pos = 3.0;
  double sigma_amb = 4.0;
  uint32_t steps = 2;
  double clamp_margin = 0.01;
  // Relocated proxies are rescaled to unit length so the criteria stay on the
  // cosine scale; false keeps the raw positive-set mean.
  bool normalize_proxy = true;
  // Mining requires unit rows unless explicitly opted out for sensitivity runs.
  bool allow_unnormalized = false;
};

void validate_config(const MiningConfig& config);

// One trajectory entry per step, including step 0 (proxy = anchor row).
struct TrajectoryPoint {
  std::vector<double> proxy;
  double phi = 0.0;
  double psi_raw = 0.0;  // before the clamp
  double psi = 0.0;      // after the clamp
  double mean_norm = 0.0;  // norm of the positive-set mean before rescaling
};

struct AnchorState {
  uint32_t anchor_index = 0;
  std::vector<double> proxy;
  double phi = 0.0;
  double psi = 0.0;
  uint32_t step = 0;
  std::vector<uint32_t> positives;  // ascending
  std::vector<TrajectoryPoint> trajectory;  // length step+1
};

struct Partition {
  std::vector<uint32_t> positives;
  std::vector<uint32_t> ambiguous;
  std::vector<uint32_t> negatives;
};

// Per-anchor output row. phi/psi/mean_norm are NaN for strategies that have
// no such diagnostics (the baselines).
struct AnchorSets {
  uint32_t anchor = 0;
  std::vector<uint32_t> positives;
  std::vector<uint32_t> ambiguous;
  double phi = 0.0;
  double psi = 0.0;
  double proxy_norm = 0.0;
  uint32_t steps = 0;
};

struct MiningResult {
  uint32_t n = 0;
  std::string strategy;
  std::map<std::string, double> params;
  std::vector<AnchorSets> anchors;
  // When mining ran on a subsample, maps local row ids to the source batch.
  std::optional<std::vector<uint32_t>> source_indices;

  // Complement of P ∪ A for entry k, ascending. Negatives are implicit in the
  // stored form; every index not positive or ambiguous is negative.
  std::vector<uint32_t> negatives_of(std::size_t k) const;
};

// { j : f_anchor · f_j > phi0 }, strict inequality, ascending.
std::vector<uint32_t> initial_positives(const FeatureBatch& batch, std::size_t anchor,
                                        double phi0);

// Mean of the positive rows, rescaled to unit length when renormalize is set.
// mean_norm_out, when non-null, receives the pre-rescale norm.
std::vector<double> relocate_proxy(const FeatureBatch& batch,
                                   const std::vector<uint32_t>& positives,
                                   bool renormalize = true,
                                   double* mean_norm_out = nullptr);

double update_phi(double phi_prev, double similarity, double sigma_pos);
double update_psi(double psi_prev, double similarity, double sigma_amb);
double update_phi(double phi_prev, std::span<const double> v_prev,
                  std::span<const double> v_new, double sigma_pos);
double update_psi(double psi_prev, std::span<const double> v_prev,
                  std::span<const double> v_new, double sigma_amb);

AnchorState propagate_anchor(const FeatureBatch& batch, std::size_t anchor,
                             const MiningConfig& config);

// P comes from the state verbatim; A is the open (psi, phi) similarity band
// minus P; N is everything else.
Partition partition_sets(const FeatureBatch& batch, const AnchorState& state);

MiningResult mine(const FeatureBatch& batch, const MiningConfig& config,
                  const std::optional<std::vector<uint32_t>>& anchors = std::nullopt,
                  unsigned threads = 0);

void save_mining_json(const MiningResult& result, const std::filesystem::path& path);
MiningResult load_mining_json(const std::filesystem::path& path);
void save_mining_binary(const MiningResult& result, const std::filesystem::path& path);
MiningResult load_mining_binary(const std::filesystem::path& path);
MiningResult load_mining(const std::filesystem::path& path);  // sniffs the format

}  // namespace ppap
