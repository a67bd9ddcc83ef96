#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppap/feature_batch.hpp"
#include "ppap/mining.hpp"

namespace ppap {

struct MixtureComponent {
  double weight = 1.0;
  std::vector<double> mean_direction;
  double concentration = 1.0;  // angular spread = 1/sqrt(concentration)
};

struct MixtureSpec {
  uint32_t dim = 0;
  std::vector<MixtureComponent> components;
  uint32_t count = 0;
  uint64_t seed = 0;
};

void validate_spec(const MixtureSpec& spec);

// Directions drawn as Gaussian perturbations of the component mean followed
// by rescaling to the unit sphere; labels are component ids. Sampling is
// single-threaded so a seed reproduces the batch everywhere.
FeatureBatch sample_mixture(const MixtureSpec& spec);

// Fixture presets. Each returns a fully populated spec with a pinned seed.
MixtureSpec two_cluster_spec(uint32_t count = 40, uint32_t dim = 8,
                             double concentration = 200.0, uint64_t seed = 11);
// Eight components in 32 dimensions with uneven weights, two deliberately
// close mean pairs, and mixed concentrations; 4096 points.
MixtureSpec overlap8_spec(uint64_t seed = 2024);
// Geometric class frequencies (ratio 0.5): one diffuse head class plus five
// tight rare classes on orthogonal directions.
MixtureSpec long_tail_spec(uint64_t seed = 7);

// TOML or JSON spec file; mean directions and weights are rescaled on load.
MixtureSpec load_mixture_spec(const std::filesystem::path& path);
void save_mixture_spec_json(const MixtureSpec& spec, const std::filesystem::path& path);

// In-memory JSON round trip, used to pin resolved specs inside run manifests.
std::string mixture_spec_to_json_string(const MixtureSpec& spec);
MixtureSpec mixture_spec_from_json_string(const std::string& text,
                                          const std::string& origin);

struct OracleOutput {
  std::vector<uint32_t> positives;
  std::vector<uint32_t> ambiguous;
  std::vector<uint32_t> negatives;
  std::vector<TrajectoryPoint> trajectory;
};

// Deliberately naive loop-and-scan miner sharing no code with the engine;
// equality against mine() is the correctness gate for the whole algorithm.
OracleOutput oracle_mine(const FeatureBatch& batch, const MiningConfig& config,
                         std::size_t anchor);

}  // namespace ppap
