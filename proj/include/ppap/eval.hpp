#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ppap/matrix.hpp"
#include "ppap/mining.hpp"

namespace ppap {

struct TrustReport {
  double mean_positive_count = 0.0;
  // Headline ratios pool every (anchor, member) pair; the per-anchor mean of
  // precisions is reported alongside since the two weightings differ.
  double tp_in_p_ratio = 0.0;
  double mean_negative_count = 0.0;
  double fp_in_n_ratio = 0.0;
  double anchor_mean_precision = 0.0;
  struct Row {
    uint32_t anchor = 0;
    uint32_t positive_count = 0;
    double precision = 0.0;
  };
  std::vector<Row> per_anchor;
};

struct CurveReport {
  std::vector<double> quantile_grid;
  std::vector<double> cumulative_mean_count;
  std::vector<double> cumulative_precision;
};

struct ClusterReport {
  double accuracy = 0.0;
  double miou = 0.0;
  std::vector<uint32_t> assignment;  // predicted class -> matched truth class
  std::vector<int64_t> intersection;  // per truth class, after matching
  std::vector<int64_t> union_size;
  std::vector<double> per_class_iou;  // NaN for classes absent on both sides
};

struct BandReport {
  struct Band {
    std::string name;
    std::vector<uint32_t> classes;
    std::size_t anchor_count = 0;
    TrustReport trust;
  };
  std::vector<Band> bands;  // few, medium, many
};

// Same-label fraction of positive pairs and of negative pairs, pooled and
// per anchor. A same-label row landing in N counts against fp_in_n.
TrustReport trust_report(const MiningResult& result, const std::vector<uint32_t>& labels);

std::vector<double> default_quantile_grid();

// Anchors sorted ascending by positive-set size; each grid point q reports
// pooled stats over the first q percent of that ordering.
CurveReport curve_report(const MiningResult& result, const std::vector<uint32_t>& labels,
                         const std::vector<double>& quantile_grid = default_quantile_grid());

// Exact maximum-overlap assignment between predicted and true class ids via
// the Hungarian algorithm on the contingency table.
ClusterReport hungarian_match(const std::vector<uint32_t>& pred,
                              const std::vector<uint32_t>& truth, uint32_t classes);

// Classes split into thirds by ascending frequency (cut-points are fractions
// of the class count); trust metrics restricted to each band's anchors.
BandReport frequency_breakdown(
    const MiningResult& result, const std::vector<uint32_t>& labels,
    const std::array<double, 3>& cuts = {1.0 / 3.0, 2.0 / 3.0, 1.0});

// Mean over points of (own-label mean similarity - other-label mean
// similarity); rows must be unit length for this to be a cosine score.
double label_silhouette(const Matrix& rows, const std::vector<uint32_t>& labels);

void write_trust_json(const TrustReport& report, const std::filesystem::path& path);
void write_trust_csv(const TrustReport& report, const std::filesystem::path& path);
void write_curve_json(const CurveReport& report, const std::filesystem::path& path);
void write_curve_csv(const CurveReport& report, const std::filesystem::path& path);
void write_cluster_json(const ClusterReport& report, const std::filesystem::path& path);
void write_cluster_csv(const ClusterReport& report, const std::filesystem::path& path);
void write_bands_json(const BandReport& report, const std::filesystem::path& path);
void write_bands_csv(const BandReport& report, const std::filesystem::path& path);

}  // namespace ppap
