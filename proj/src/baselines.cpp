#include "ppap/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ppap/errors.hpp"
#include "ppap/rng.hpp"

namespace ppap {

namespace {

constexpr double kDegenerateMeanNorm = 1e-12;

void check_normalized(const FeatureBatch& batch) {
  if (!batch.normalized) {
    raise(ErrorKind::NormalizationMismatch,
          "baseline mining requires unit-norm rows");
  }
}

std::vector<uint32_t> default_anchors(std::size_t n) {
  std::vector<uint32_t> anchors(n);
  std::iota(anchors.begin(), anchors.end(), 0u);
  return anchors;
}

}  // namespace

std::vector<uint32_t> knn_positives(const FeatureBatch& batch, std::size_t anchor,
                                    const KnnConfig& config) {
  check_normalized(batch);
  if (anchor >= batch.n()) {
    raise(ErrorKind::ConfigInvalid, "anchor index out of range");
  }
  if (config.k < 1 || config.k >= batch.n()) {
    raise(ErrorKind::ConfigInvalid, "require 1 <= k < n");
  }
  const auto sims = row_similarities(batch.data, batch.data.row_span(anchor));

  std::vector<uint32_t> order;
  order.reserve(batch.n() - 1);
  for (std::size_t j = 0; j < batch.n(); ++j) {
    if (j != anchor) order.push_back(static_cast<uint32_t>(j));
  }
  auto better = [&](uint32_t a, uint32_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return a < b;
  };
  std::nth_element(order.begin(), order.begin() + (config.k - 1), order.end(), better);
  order.resize(config.k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<uint32_t> kmeans_assign(const FeatureBatch& batch,
                                    const KmeansConfig& config) {
  check_normalized(batch);
  const std::size_t n = batch.n();
  const std::size_t dim = batch.dim();
  if (config.clusters < 1 || config.clusters > n) {
    raise(ErrorKind::ConfigInvalid, "require 1 <= clusters <= n");
  }
  if (config.max_iters < 1) raise(ErrorKind::ConfigInvalid, "max_iters must be >= 1");
  if (!(config.tol >= 0.0)) raise(ErrorKind::ConfigInvalid, "tol must be >= 0");

  const std::size_t k = config.clusters;
  Matrix centroids(k, dim);
  if (config.initial_centroids) {
    if (config.initial_centroids->rows != k || config.initial_centroids->cols != dim) {
      raise(ErrorKind::DimensionMismatch, "initial centroids shape mismatch");
    }
    centroids = *config.initial_centroids;
  } else {
    Rng rng(config.seed);
    const auto picked = rng.sample_without_replacement(static_cast<uint32_t>(n),
                                                       static_cast<uint32_t>(k));
    for (std::size_t c = 0; c < k; ++c) {
      std::copy_n(batch.data.row(picked[c]), dim, centroids.row(c));
    }
  }

  std::vector<uint32_t> assignment(n, 0);
  auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = batch.data.row(i);
      std::size_t best = 0;
      double best_sim = dot(centroids.row(0), f, dim);
      for (std::size_t c = 1; c < k; ++c) {
        const double sim = dot(centroids.row(c), f, dim);
        if (sim > best_sim) {
          best_sim = sim;
          best = c;
        }
      }
      assignment[i] = static_cast<uint32_t>(best);
    }
  };

  assign_all();
  Matrix sums(k, dim);
  std::vector<std::size_t> counts(k);
  for (uint32_t iter = 0; iter < config.max_iters; ++iter) {
    std::fill(sums.data.begin(), sums.data.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0u);
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = batch.data.row(i);
      double* s = sums.row(assignment[i]);
      for (std::size_t d = 0; d < dim; ++d) s[d] += f[d];
      ++counts[assignment[i]];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      double* s = sums.row(c);
      const auto count = static_cast<double>(counts[c]);
      for (std::size_t d = 0; d < dim; ++d) s[d] /= count;
      const double norm = l2_norm(s, dim);
      if (norm < kDegenerateMeanNorm) continue;
      for (std::size_t d = 0; d < dim; ++d) s[d] /= norm;
      double shift_sq = 0.0;
      const double* old = centroids.row(c);
      for (std::size_t d = 0; d < dim; ++d) {
        const double delta = s[d] - old[d];
        shift_sq += delta * delta;
      }
      max_shift = std::max(max_shift, std::sqrt(shift_sq));
      std::copy_n(s, dim, centroids.row(c));
    }
    assign_all();
    if (max_shift < config.tol) break;
  }
  return assignment;
}

std::vector<uint32_t> kmeans_positives(const std::vector<uint32_t>& assignment,
                                       std::size_t anchor) {
  if (anchor >= assignment.size()) {
    raise(ErrorKind::ConfigInvalid, "anchor index out of range");
  }
  std::vector<uint32_t> out;
  const uint32_t cluster = assignment[anchor];
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    if (assignment[j] == cluster) out.push_back(static_cast<uint32_t>(j));
  }
  return out;
}

namespace {

MiningResult make_baseline_result(const FeatureBatch& batch, std::string strategy,
                                  std::map<std::string, double> params,
                                  const std::optional<std::vector<uint32_t>>& anchors) {
  MiningResult result;
  result.n = static_cast<uint32_t>(batch.n());
  result.strategy = std::move(strategy);
  result.params = std::move(params);
  const std::vector<uint32_t> anchor_list =
      anchors ? *anchors : default_anchors(batch.n());
  result.anchors.resize(anchor_list.size());
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < anchor_list.size(); ++i) {
    result.anchors[i].anchor = anchor_list[i];
    result.anchors[i].phi = nan;
    result.anchors[i].psi = nan;
    result.anchors[i].proxy_norm = nan;
    result.anchors[i].steps = 0;
  }
  return result;
}

}  // namespace

MiningResult mine_knn(const FeatureBatch& batch, const KnnConfig& config,
                      const std::optional<std::vector<uint32_t>>& anchors) {
  MiningResult result = make_baseline_result(
      batch, "knn", {{"k", static_cast<double>(config.k)}}, anchors);
  for (AnchorSets& sets : result.anchors) {
    sets.positives = knn_positives(batch, sets.anchor, config);
  }
  return result;
}

MiningResult mine_kmeans(const FeatureBatch& batch, const KmeansConfig& config,
                         const std::optional<std::vector<uint32_t>>& anchors) {
  MiningResult result = make_baseline_result(
      batch, "kmeans",
      {{"clusters", static_cast<double>(config.clusters)},
       {"max_iters", static_cast<double>(config.max_iters)},
       {"seed", static_cast<double>(config.seed)},
       {"tol", config.tol}},
      anchors);
  const auto assignment = kmeans_assign(batch, config);
  for (AnchorSets& sets : result.anchors) {
    sets.positives = kmeans_positives(assignment, sets.anchor);
  }
  return result;
}

}  // namespace ppap
