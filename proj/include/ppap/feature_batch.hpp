#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "ppap/matrix.hpp"

namespace ppap {

// A frozen batch of patch features. Rows live as doubles in memory even when
// the storage width is 4 bytes; in that mode every element is an exact float
// promotion so save/load round-trips bitwise.
struct FeatureBatch {
  Matrix data;
  std::optional<std::vector<uint32_t>> labels;
  bool normalized = false;
  uint8_t float_width = 8;

  std::size_t n() const { return data.rows; }
  std::size_t dim() const { return data.cols; }
  bool has_labels() const { return labels.has_value(); }
};

struct SubsampleSpec {
  double ratio = 1.0;
  uint64_t seed = 0;
};

// Unit-norm slack: 1e-6 at 64-bit storage, doubled at 32-bit.
double unit_norm_tolerance(uint8_t float_width);

// Full invariant check; raises on the first violation.
void validate_batch(const FeatureBatch& batch);

FeatureBatch load_batch(const std::filesystem::path& path);
void save_batch(const FeatureBatch& batch, const std::filesystem::path& path);

// Returns a copy with unit L2 rows and normalized=true. In float32 mode the
// result is quantized through float so it stays storage-exact.
FeatureBatch normalize(const FeatureBatch& batch);

// Quantizes every element through float and marks the batch as 32-bit.
FeatureBatch as_float32(const FeatureBatch& batch);

// Keeps floor(ratio*n) rows, drawn uniformly without replacement, returned in
// ascending original order together with the original-row index map.
std::pair<FeatureBatch, std::vector<uint32_t>> subsample(const FeatureBatch& batch,
                                                         const SubsampleSpec& spec);

// Plain-text import for hand-made fixtures: one row per line, optional header,
// optional trailing "label" column.
FeatureBatch import_csv(const std::filesystem::path& path);

}  // namespace ppap
