#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ppap/feature_batch.hpp"
#include "ppap/mining.hpp"

namespace ppap {

struct LossConfig {
  double tau = 1.0;
  double learning_rate = 0.1;
  uint32_t epochs = 100;
  uint32_t projection_dim = 16;
  uint64_t seed = 0;
  // Re-derive the mined sets from the projected features after every update
  // instead of keeping the frozen-feature sets. Experimental.
  bool remine_every_epoch = false;
};

void validate_loss_config(const LossConfig& config);

struct ProjectionState {
  Matrix weight;  // D x projection_dim
  // Entry e is the loss after e gradient updates, so epochs+1 entries.
  std::vector<double> loss_history;
};

// Mean over anchors of the per-anchor contrastive term. The denominator runs
// over N ∪ P; ambiguous rows never appear. Anchor selection defaults to every
// entry of the mining result. Rows of z are treated as free variables.
double contrastive_loss(const Matrix& z, const MiningResult& result, double tau,
                        const std::optional<std::vector<uint32_t>>& entries = std::nullopt);

// Analytic d(mean loss)/dz, same shape as z.
Matrix contrastive_grad(const Matrix& z, const MiningResult& result, double tau,
                        const std::optional<std::vector<uint32_t>>& entries = std::nullopt);

// z = row-normalized f·W. Rows whose raw projection has negligible norm are
// left unscaled.
Matrix project(const Matrix& features, const Matrix& weight);

using ReminerFn = std::function<MiningResult(const Matrix& z)>;

// Plain gradient descent on the projection weights, loss chained through the
// row normalization. Supervision comes from the frozen-feature mining result.
ProjectionState train_projection(const FeatureBatch& batch, const MiningResult& result,
                                 const LossConfig& config,
                                 const ReminerFn& reminer = nullptr);

}  // namespace ppap
