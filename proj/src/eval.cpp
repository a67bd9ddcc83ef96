#include "ppap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "ppap/errors.hpp"
#include "ppap/format.hpp"

namespace ppap {

namespace {

using nlohmann::json;

void check_labels(std::size_t label_count, uint32_t n) {
  if (label_count != n) {
    raise(ErrorKind::DimensionMismatch,
          "label array covers " + std::to_string(label_count) + " rows, expected " +
              std::to_string(n));
  }
}

TrustReport trust_over_entries(const MiningResult& result,
                               const std::vector<uint32_t>& labels,
                               const std::vector<std::size_t>& entries) {
  TrustReport report;
  if (entries.empty()) return report;

  uint64_t pooled_p = 0, pooled_tp = 0, pooled_n = 0, pooled_fp = 0;
  double count_sum = 0.0, precision_sum = 0.0, negative_sum = 0.0;
  report.per_anchor.reserve(entries.size());

  for (std::size_t k : entries) {
    const AnchorSets& sets = result.anchors[k];
    const uint32_t anchor_label = labels[sets.anchor];

    uint64_t tp = 0;
    for (uint32_t p : sets.positives) tp += labels[p] == anchor_label ? 1 : 0;
    const auto p_count = static_cast<uint64_t>(sets.positives.size());
    pooled_p += p_count;
    pooled_tp += tp;

    const std::vector<uint32_t> negatives = result.negatives_of(k);
    uint64_t fp = 0;
    for (uint32_t m : negatives) fp += labels[m] == anchor_label ? 1 : 0;
    pooled_n += negatives.size();
    pooled_fp += fp;

    TrustReport::Row row;
    row.anchor = sets.anchor;
    row.positive_count = static_cast<uint32_t>(p_count);
    row.precision = p_count == 0 ? 0.0
                                 : static_cast<double>(tp) / static_cast<double>(p_count);
    count_sum += static_cast<double>(p_count);
    precision_sum += row.precision;
    negative_sum += static_cast<double>(negatives.size());
    report.per_anchor.push_back(row);
  }

  const auto anchors = static_cast<double>(entries.size());
  report.mean_positive_count = count_sum / anchors;
  report.mean_negative_count = negative_sum / anchors;
  report.anchor_mean_precision = precision_sum / anchors;
  report.tp_in_p_ratio =
      pooled_p == 0 ? 0.0 : static_cast<double>(pooled_tp) / static_cast<double>(pooled_p);
  report.fp_in_n_ratio =
      pooled_n == 0 ? 0.0 : static_cast<double>(pooled_fp) / static_cast<double>(pooled_n);
  return report;
}

std::vector<std::size_t> every_entry(const MiningResult& result) {
  std::vector<std::size_t> entries(result.anchors.size());
  std::iota(entries.begin(), entries.end(), std::size_t{0});
  return entries;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  return out;
}

void finish_out(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

json trust_to_json(const TrustReport& report) {
  json rows = json::array();
  for (const auto& row : report.per_anchor) {
    rows.push_back({{"anchor", row.anchor},
                    {"positive_count", row.positive_count},
                    {"precision", row.precision}});
  }
  return {{"mean_positive_count", report.mean_positive_count},
          {"tp_in_p_ratio", report.tp_in_p_ratio},
          {"mean_negative_count", report.mean_negative_count},
          {"fp_in_n_ratio", report.fp_in_n_ratio},
          {"anchor_mean_precision", report.anchor_mean_precision},
          {"per_anchor", std::move(rows)}};
}

}  // namespace

TrustReport trust_report(const MiningResult& result, const std::vector<uint32_t>& labels) {
  check_labels(labels.size(), result.n);
  return trust_over_entries(result, labels, every_entry(result));
}

std::vector<double> default_quantile_grid() {
  return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
}

CurveReport curve_report(const MiningResult& result, const std::vector<uint32_t>& labels,
                         const std::vector<double>& quantile_grid) {
  check_labels(labels.size(), result.n);
  if (quantile_grid.empty()) {
    raise(ErrorKind::ConfigInvalid, "quantile grid must not be empty");
  }
  for (std::size_t i = 0; i < quantile_grid.size(); ++i) {
    const double q = quantile_grid[i];
    if (!(q > 0.0) || q > 100.0) {
      raise(ErrorKind::ConfigInvalid, "quantiles must lie in (0, 100]");
    }
    if (i > 0 && quantile_grid[i - 1] >= q) {
      raise(ErrorKind::ConfigInvalid, "quantile grid must be strictly increasing");
    }
  }

  std::vector<std::size_t> order(result.anchors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = result.anchors[a];
    const auto& sb = result.anchors[b];
    if (sa.positives.size() != sb.positives.size()) {
      return sa.positives.size() < sb.positives.size();
    }
    if (sa.anchor != sb.anchor) return sa.anchor < sb.anchor;
    return a < b;
  });

  // Prefix sums along the sorted order make each cumulative range O(1).
  const std::size_t total = order.size();
  std::vector<uint64_t> count_prefix(total + 1, 0), tp_prefix(total + 1, 0);
  for (std::size_t r = 0; r < total; ++r) {
    const AnchorSets& sets = result.anchors[order[r]];
    const uint32_t anchor_label = labels[sets.anchor];
    uint64_t tp = 0;
    for (uint32_t p : sets.positives) tp += labels[p] == anchor_label ? 1 : 0;
    count_prefix[r + 1] = count_prefix[r] + sets.positives.size();
    tp_prefix[r + 1] = tp_prefix[r] + tp;
  }

  CurveReport report;
  report.quantile_grid = quantile_grid;
  for (double q : quantile_grid) {
    std::size_t m = 0;
    if (total > 0) {
      m = static_cast<std::size_t>(
          std::floor(q * static_cast<double>(total) / 100.0));
      m = std::clamp<std::size_t>(m, 1, total);
    }
    if (m == 0) {
      report.cumulative_mean_count.push_back(0.0);
      report.cumulative_precision.push_back(0.0);
      continue;
    }
    report.cumulative_mean_count.push_back(static_cast<double>(count_prefix[m]) /
                                           static_cast<double>(m));
    report.cumulative_precision.push_back(
        count_prefix[m] == 0 ? 0.0
                             : static_cast<double>(tp_prefix[m]) /
                                   static_cast<double>(count_prefix[m]));
  }
  return report;
}

ClusterReport hungarian_match(const std::vector<uint32_t>& pred,
                              const std::vector<uint32_t>& truth, uint32_t classes) {
  if (pred.size() != truth.size()) {
    raise(ErrorKind::DimensionMismatch, "prediction and truth lengths differ");
  }
  if (classes == 0) raise(ErrorKind::ConfigInvalid, "classes must be >= 1");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= classes || truth[i] >= classes) {
      raise(ErrorKind::ConfigInvalid,
            "class id out of range at position " + std::to_string(i));
    }
  }

  const std::size_t k = classes;
  std::vector<std::vector<int64_t>> overlap(k, std::vector<int64_t>(k, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++overlap[pred[i]][truth[i]];

  // Assignment via shortest augmenting paths with potentials, minimizing the
  // negated overlap. 1-indexed internals.
  constexpr int64_t kInf = std::numeric_limits<int64_t>::max() / 4;
  std::vector<int64_t> u(k + 1, 0), v(k + 1, 0);
  std::vector<std::size_t> match(k + 1, 0), way(k + 1, 0);
  for (std::size_t i = 1; i <= k; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<int64_t> minv(k + 1, kInf);
    std::vector<bool> used(k + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      std::size_t j1 = 0;
      int64_t delta = kInf;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const int64_t cur = -overlap[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  ClusterReport report;
  report.assignment.assign(k, 0);
  for (std::size_t j = 1; j <= k; ++j) {
    report.assignment[match[j] - 1] = static_cast<uint32_t>(j - 1);
  }

  std::vector<int64_t> row_sum(k, 0), col_sum(k, 0);
  int64_t matched = 0;
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t t = 0; t < k; ++t) {
      row_sum[p] += overlap[p][t];
      col_sum[t] += overlap[p][t];
    }
  }
  report.intersection.assign(k, 0);
  report.union_size.assign(k, 0);
  report.per_class_iou.assign(k, std::numeric_limits<double>::quiet_NaN());
  double iou_sum = 0.0;
  std::size_t iou_classes = 0;
  for (std::size_t p = 0; p < k; ++p) {
    const std::size_t t = report.assignment[p];
    const int64_t inter = overlap[p][t];
    const int64_t uni = row_sum[p] + col_sum[t] - inter;
    matched += inter;
    report.intersection[t] = inter;
    report.union_size[t] = uni;
    if (uni > 0) {
      report.per_class_iou[t] = static_cast<double>(inter) / static_cast<double>(uni);
      iou_sum += report.per_class_iou[t];
      ++iou_classes;
    }
  }
  const auto total = static_cast<double>(pred.size());
  report.accuracy = total == 0.0 ? 0.0 : static_cast<double>(matched) / total;
  report.miou = iou_classes == 0 ? 0.0 : iou_sum / static_cast<double>(iou_classes);
  return report;
}

BandReport frequency_breakdown(const MiningResult& result,
                               const std::vector<uint32_t>& labels,
                               const std::array<double, 3>& cuts) {
  check_labels(labels.size(), result.n);
  if (!(cuts[0] > 0.0) || !(cuts[1] > cuts[0]) || !(cuts[2] > cuts[1]) ||
      cuts[2] > 1.0) {
    raise(ErrorKind::ConfigInvalid, "band cut-points must satisfy 0 < a < b < c <= 1");
  }

  std::map<uint32_t, uint64_t> counts;
  for (uint32_t lab : labels) ++counts[lab];
  std::vector<std::pair<uint32_t, uint64_t>> by_freq(counts.begin(), counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });

  const auto k = static_cast<double>(by_freq.size());
  const std::size_t b0 = static_cast<std::size_t>(std::floor(k * cuts[0]));
  const std::size_t b1 = static_cast<std::size_t>(std::floor(k * cuts[1]));
  const std::size_t b2 = static_cast<std::size_t>(std::floor(k * cuts[2]));

  BandReport report;
  report.bands.resize(3);
  report.bands[0].name = "few";
  report.bands[1].name = "medium";
  report.bands[2].name = "many";

  std::map<uint32_t, std::size_t> band_of;
  for (std::size_t rank = 0; rank < by_freq.size(); ++rank) {
    std::size_t band = 2;
    if (rank < b0) {
      band = 0;
    } else if (rank < b1) {
      band = 1;
    } else if (rank >= b2) {
      band = 2;  // floor(k*1.0) == k keeps this branch empty
    }
    band_of[by_freq[rank].first] = band;
    report.bands[band].classes.push_back(by_freq[rank].first);
  }
  for (auto& band : report.bands) std::sort(band.classes.begin(), band.classes.end());

  std::array<std::vector<std::size_t>, 3> entries;
  for (std::size_t e = 0; e < result.anchors.size(); ++e) {
    entries[band_of[labels[result.anchors[e].anchor]]].push_back(e);
  }
  for (std::size_t b = 0; b < 3; ++b) {
    report.bands[b].anchor_count = entries[b].size();
    report.bands[b].trust = trust_over_entries(result, labels, entries[b]);
  }
  return report;
}

double label_silhouette(const Matrix& rows, const std::vector<uint32_t>& labels) {
  if (labels.size() != rows.rows) {
    raise(ErrorKind::DimensionMismatch, "label array length does not match rows");
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < rows.rows; ++i) {
    double same_sum = 0.0, diff_sum = 0.0;
    std::size_t same_n = 0, diff_n = 0;
    for (std::size_t j = 0; j < rows.rows; ++j) {
      if (j == i) continue;
      const double sim = dot(rows.row(i), rows.row(j), rows.cols);
      if (labels[j] == labels[i]) {
        same_sum += sim;
        ++same_n;
      } else {
        diff_sum += sim;
        ++diff_n;
      }
    }
    if (same_n == 0 || diff_n == 0) continue;
    total += same_sum / static_cast<double>(same_n) -
             diff_sum / static_cast<double>(diff_n);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

void write_trust_json(const TrustReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << trust_to_json(report).dump(2) << '\n';
  finish_out(out, path);
}

void write_trust_csv(const TrustReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "anchor,positive_count,precision\n";
  for (const auto& row : report.per_anchor) {
    out << row.anchor << ',' << row.positive_count << ',' << fmt_double(row.precision)
        << '\n';
  }
  finish_out(out, path);
}

void write_curve_json(const CurveReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  const json root = {{"quantile_grid", report.quantile_grid},
                     {"cumulative_mean_count", report.cumulative_mean_count},
                     {"cumulative_precision", report.cumulative_precision}};
  out << root.dump(2) << '\n';
  finish_out(out, path);
}

void write_curve_csv(const CurveReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "q,cumulative_mean_count,cumulative_precision\n";
  for (std::size_t i = 0; i < report.quantile_grid.size(); ++i) {
    out << fmt_double(report.quantile_grid[i]) << ','
        << fmt_double(report.cumulative_mean_count[i]) << ','
        << fmt_double(report.cumulative_precision[i]) << '\n';
  }
  finish_out(out, path);
}

void write_cluster_json(const ClusterReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  json per_class = json::array();
  for (std::size_t c = 0; c < report.per_class_iou.size(); ++c) {
    json entry = {{"class", c},
                  {"intersection", report.intersection[c]},
                  {"union", report.union_size[c]}};
    if (std::isfinite(report.per_class_iou[c])) entry["iou"] = report.per_class_iou[c];
    per_class.push_back(std::move(entry));
  }
  const json root = {{"accuracy", report.accuracy},
                     {"miou", report.miou},
                     {"assignment", report.assignment},
                     {"per_class", std::move(per_class)}};
  out << root.dump(2) << '\n';
  finish_out(out, path);
}

void write_cluster_csv(const ClusterReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "class,intersection,union,iou\n";
  for (std::size_t c = 0; c < report.per_class_iou.size(); ++c) {
    out << c << ',' << report.intersection[c] << ',' << report.union_size[c] << ','
        << fmt_double(report.per_class_iou[c]) << '\n';
  }
  finish_out(out, path);
}

namespace {

json band_to_json(const BandReport::Band& band) {
  json entry = trust_to_json(band.trust);
  entry["name"] = band.name;
  entry["classes"] = band.classes;
  entry["anchor_count"] = band.anchor_count;
  entry.erase("per_anchor");  // bands summarize; per-anchor rows live in trust output
  return entry;
}

}  // namespace

void write_bands_json(const BandReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  json bands = json::array();
  for (const auto& band : report.bands) bands.push_back(band_to_json(band));
  out << json{{"bands", std::move(bands)}}.dump(2) << '\n';
  finish_out(out, path);
}

void write_bands_csv(const BandReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "band,class_count,anchor_count,mean_positive_count,tp_in_p_ratio,"
         "mean_negative_count,fp_in_n_ratio,anchor_mean_precision\n";
  for (const auto& band : report.bands) {
    out << band.name << ',' << band.classes.size() << ',' << band.anchor_count << ','
        << fmt_double(band.trust.mean_positive_count) << ','
        << fmt_double(band.trust.tp_in_p_ratio) << ','
        << fmt_double(band.trust.mean_negative_count) << ','
        << fmt_double(band.trust.fp_in_n_ratio) << ','
        << fmt_double(band.trust.anchor_mean_precision) << '\n';
  }
  finish_out(out, path);
}

}  // namespace ppap
