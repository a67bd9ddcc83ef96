#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ppap/feature_batch.hpp"
#include "ppap/mining.hpp"

namespace ppap {

struct KnnConfig {
  uint32_t k = 1;
};

struct KmeansConfig {
  uint32_t clusters = 2;
  uint32_t max_iters = 100;
  uint64_t seed = 0;
  double tol = 1e-9;
  // Bypasses seeded initialization; rows are the starting centroids. Exists so
  // permutation tests can pin the init exactly.
  std::optional<Matrix> initial_centroids;
};

// The k most similar rows to the anchor, anchor excluded, similarity ties
// broken toward the lower index. Returned ascending by index.
std::vector<uint32_t> knn_positives(const FeatureBatch& batch, std::size_t anchor,
                                    const KnnConfig& config);

// Spherical Lloyd iteration: cosine assignment, renormalized mean centroids,
// seeded draw of initial centroids without replacement.
std::vector<uint32_t> kmeans_assign(const FeatureBatch& batch, const KmeansConfig& config);

std::vector<uint32_t> kmeans_positives(const std::vector<uint32_t>& assignment,
                                       std::size_t anchor);

// Baseline miners share MiningResult so evaluation consumes every strategy
// uniformly. Negatives are the complement of P; the ambiguous set is empty.
MiningResult mine_knn(const FeatureBatch& batch, const KnnConfig& config,
                      const std::optional<std::vector<uint32_t>>& anchors = std::nullopt);
MiningResult mine_kmeans(const FeatureBatch& batch, const KmeansConfig& config,
                         const std::optional<std::vector<uint32_t>>& anchors = std::nullopt);

}  // namespace ppap
