#include "ppap/objective.hpp"

#include <cmath>
#include <limits>

#include "ppap/errors.hpp"
#include "ppap/rng.hpp"

namespace ppap {

namespace {

constexpr double kDegenerateNorm = 1e-12;

void check_entries(const MiningResult& result,
                   const std::optional<std::vector<uint32_t>>& entries) {
  if (!entries) return;
  for (uint32_t k : *entries) {
    if (k >= result.anchors.size()) {
      raise(ErrorKind::ConfigInvalid, "mining entry index out of range");
    }
  }
}

std::vector<uint32_t> all_entries(std::size_t count) {
  std::vector<uint32_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<uint32_t>(i);
  return v;
}

// Per-anchor pieces shared by loss and gradient. Candidates are B minus the
// ambiguous set, ascending; u holds z_i·z_m/tau in candidate order.
struct AnchorTerm {
  std::vector<uint32_t> candidates;
  std::vector<double> u;
  double log_denom = 0.0;
  double loss = 0.0;
};

AnchorTerm anchor_term(const Matrix& z, const AnchorSets& sets, uint32_t n, double tau) {
  if (sets.positives.empty()) {
    raise(ErrorKind::EmptyPositiveSet,
          "anchor " + std::to_string(sets.anchor) + " has no positives");
  }
  AnchorTerm term;
  term.candidates.reserve(n - sets.ambiguous.size());
  std::size_t a = 0;
  for (uint32_t j = 0; j < n; ++j) {
    if (a < sets.ambiguous.size() && sets.ambiguous[a] == j) {
      ++a;
      continue;
    }
    term.candidates.push_back(j);
  }

  const double* zi = z.row(sets.anchor);
  term.u.resize(term.candidates.size());
  double max_u = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < term.candidates.size(); ++m) {
    term.u[m] = dot(zi, z.row(term.candidates[m]), z.cols) / tau;
    max_u = std::max(max_u, term.u[m]);
  }

  double denom = 0.0;
  for (double u : term.u) denom += std::exp(u - max_u);
  term.log_denom = max_u + std::log(denom);

  double positive_sum = 0.0;
  std::size_t p_cursor = 0;
  for (std::size_t m = 0; m < term.candidates.size(); ++m) {
    if (p_cursor < sets.positives.size() &&
        sets.positives[p_cursor] == term.candidates[m]) {
      positive_sum += term.u[m];
      ++p_cursor;
    }
  }
  if (p_cursor != sets.positives.size()) {
    raise(ErrorKind::ConfigInvalid,
          "positive and ambiguous sets overlap for anchor " +
              std::to_string(sets.anchor));
  }
  term.loss =
      term.log_denom - positive_sum / static_cast<double>(sets.positives.size());
  return term;
}

void check_result_shape(const Matrix& z, const MiningResult& result) {
  if (z.rows != result.n) {
    raise(ErrorKind::DimensionMismatch,
          "projected batch has " + std::to_string(z.rows) +
              " rows but the mining result covers " + std::to_string(result.n));
  }
}

// Row-normalized f·W; raw_norms, when requested, receives each row's
// pre-normalization length.
Matrix project_rows(const Matrix& features, const Matrix& weight,
                    std::vector<double>* raw_norms) {
  if (features.cols != weight.rows) {
    raise(ErrorKind::DimensionMismatch, "projection weight shape mismatch");
  }
  Matrix z(features.rows, weight.cols, 0.0);
  if (raw_norms) raw_norms->assign(features.rows, 0.0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double* f = features.row(i);
    double* zr = z.row(i);
    for (std::size_t d = 0; d < features.cols; ++d) {
      const double fd = f[d];
      const double* w = weight.row(d);
      for (std::size_t c = 0; c < weight.cols; ++c) zr[c] += fd * w[c];
    }
    const double norm = l2_norm(zr, z.cols);
    if (raw_norms) (*raw_norms)[i] = norm;
    if (norm >= kDegenerateNorm) {
      for (std::size_t c = 0; c < z.cols; ++c) zr[c] /= norm;
    }
  }
  return z;
}

}  // namespace

void validate_loss_config(const LossConfig& config) {
  if (!(config.tau > 0.0) || !std::isfinite(config.tau)) {
    raise(ErrorKind::ConfigInvalid, "tau must be a positive finite number");
  }
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    raise(ErrorKind::ConfigInvalid, "learning_rate must be >= 0");
  }
  if (config.projection_dim == 0) {
    raise(ErrorKind::ConfigInvalid, "projection_dim must be >= 1");
  }
}

double contrastive_loss(const Matrix& z, const MiningResult& result, double tau,
                        const std::optional<std::vector<uint32_t>>& entries) {
  if (!(tau > 0.0)) raise(ErrorKind::ConfigInvalid, "tau must be > 0");
  check_result_shape(z, result);
  check_entries(result, entries);
  const std::vector<uint32_t> selected =
      entries ? *entries : all_entries(result.anchors.size());
  if (selected.empty()) return 0.0;

  double total = 0.0;
  for (uint32_t k : selected) {
    total += anchor_term(z, result.anchors[k], result.n, tau).loss;
  }
  const double loss = total / static_cast<double>(selected.size());
  if (!std::isfinite(loss)) {
    raise(ErrorKind::NumericFailure, "contrastive loss is not finite");
  }
  return loss;
}

Matrix contrastive_grad(const Matrix& z, const MiningResult& result, double tau,
                        const std::optional<std::vector<uint32_t>>& entries) {
  if (!(tau > 0.0)) raise(ErrorKind::ConfigInvalid, "tau must be > 0");
  check_result_shape(z, result);
  check_entries(result, entries);
  const std::vector<uint32_t> selected =
      entries ? *entries : all_entries(result.anchors.size());

  Matrix grad(z.rows, z.cols, 0.0);
  if (selected.empty()) return grad;
  const double inv_count = 1.0 / static_cast<double>(selected.size());

  for (uint32_t k : selected) {
    const AnchorSets& sets = result.anchors[k];
    const AnchorTerm term = anchor_term(z, sets, result.n, tau);
    const double* zi = z.row(sets.anchor);
    double* gi = grad.row(sets.anchor);
    const double inv_p = 1.0 / static_cast<double>(sets.positives.size());

    std::size_t p_cursor = 0;
    for (std::size_t m = 0; m < term.candidates.size(); ++m) {
      const uint32_t j = term.candidates[m];
      double g = std::exp(term.u[m] - term.log_denom);
      if (p_cursor < sets.positives.size() && sets.positives[p_cursor] == j) {
        g -= inv_p;
        ++p_cursor;
      }
      const double scale = g / tau * inv_count;
      const double* zj = z.row(j);
      double* gj = grad.row(j);
      // Both sides accumulate; for j == anchor the two contributions combine
      // into the d(z_i·z_i)/dz_i = 2 z_i term.
      for (std::size_t d = 0; d < z.cols; ++d) gi[d] += scale * zj[d];
      for (std::size_t d = 0; d < z.cols; ++d) gj[d] += scale * zi[d];
    }
  }
  for (double g : grad.data) {
    if (!std::isfinite(g)) {
      raise(ErrorKind::NumericFailure, "contrastive gradient is not finite");
    }
  }
  return grad;
}

Matrix project(const Matrix& features, const Matrix& weight) {
  return project_rows(features, weight, nullptr);
}

ProjectionState train_projection(const FeatureBatch& batch, const MiningResult& result,
                                 const LossConfig& config, const ReminerFn& reminer) {
  validate_loss_config(config);
  if (result.n != batch.n()) {
    raise(ErrorKind::DimensionMismatch,
          "mining result covers " + std::to_string(result.n) + " rows, batch has " +
              std::to_string(batch.n()));
  }

  const std::size_t dim = batch.dim();
  const std::size_t pdim = config.projection_dim;
  ProjectionState state;
  state.weight = Matrix(dim, pdim);
  Rng rng(config.seed);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& w : state.weight.data) w = rng.normal() * init_scale;

  MiningResult working = result;
  std::vector<double> raw_norms;
  Matrix z = project_rows(batch.data, state.weight, &raw_norms);
  state.loss_history.reserve(config.epochs + 1);
  state.loss_history.push_back(contrastive_loss(z, working, config.tau));

  std::vector<double> g_raw(pdim);
  for (uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Matrix gz;
    try {
      gz = contrastive_grad(z, working, config.tau);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NumericFailure) {
        raise(ErrorKind::NumericFailure,
              "training diverged at epoch " + std::to_string(epoch));
      }
      throw;
    }

    // Chain through z_r = raw_r/|raw_r|: g_raw = (g - (g·z)z)/|raw|, then
    // gW = f^T g_raw, accumulated row by row.
    Matrix gw(dim, pdim, 0.0);
    for (std::size_t r = 0; r < batch.n(); ++r) {
      const double* f = batch.data.row(r);
      const double* zr = z.row(r);
      const double* g = gz.row(r);
      if (raw_norms[r] < kDegenerateNorm) {
        // z was the raw row itself; the chain rule is the identity.
        for (std::size_t c = 0; c < pdim; ++c) g_raw[c] = g[c];
      } else {
        const double gz_dot = dot(g, zr, pdim);
        for (std::size_t c = 0; c < pdim; ++c) {
          g_raw[c] = (g[c] - gz_dot * zr[c]) / raw_norms[r];
        }
      }
      for (std::size_t d = 0; d < dim; ++d) {
        const double fd = f[d];
        double* gwr = gw.row(d);
        for (std::size_t c = 0; c < pdim; ++c) gwr[c] += fd * g_raw[c];
      }
    }

    for (std::size_t idx = 0; idx < state.weight.data.size(); ++idx) {
      state.weight.data[idx] -= config.learning_rate * gw.data[idx];
    }

    z = project_rows(batch.data, state.weight, &raw_norms);
    if (config.remine_every_epoch && reminer) working = reminer(z);
    double loss = 0.0;
    try {
      loss = contrastive_loss(z, working, config.tau);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NumericFailure) {
        raise(ErrorKind::NumericFailure,
              "training diverged at epoch " + std::to_string(epoch));
      }
      throw;
    }
    state.loss_history.push_back(loss);
  }
  return state;
}

}  // namespace ppap
