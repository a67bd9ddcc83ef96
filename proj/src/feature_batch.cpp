#include "ppap/feature_batch.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "ppap/binary_io.hpp"
#include "ppap/errors.hpp"
#include "ppap/rng.hpp"

namespace ppap {

namespace {

constexpr char kMagic[8] = {'P', 'P', 'A', 'P', 'F', 'E', 'A', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kFlagNormalized = 0x01;
constexpr uint8_t kFlagHasLabels = 0x02;

bool exactly_float(double x) { return static_cast<double>(static_cast<float>(x)) == x; }

}  // namespace

double unit_norm_tolerance(uint8_t float_width) {
  return float_width == 4 ? 2e-6 : 1e-6;
}

void validate_batch(const FeatureBatch& batch) {
  if (batch.n() == 0 || batch.dim() == 0) {
    raise(ErrorKind::ConfigInvalid, "batch must have at least one row and one column");
  }
  if (batch.float_width != 4 && batch.float_width != 8) {
    raise(ErrorKind::ConfigInvalid, "float width must be 4 or 8");
  }
  if (batch.data.data.size() != batch.n() * batch.dim()) {
    raise(ErrorKind::DimensionMismatch, "data size does not match n*D");
  }
  for (std::size_t idx = 0; idx < batch.data.data.size(); ++idx) {
    const double x = batch.data.data[idx];
    if (!std::isfinite(x)) {
      raise(ErrorKind::NonFiniteValue,
            "non-finite value at row " + std::to_string(idx / batch.dim()) +
                ", column " + std::to_string(idx % batch.dim()));
    }
    if (batch.float_width == 4 && !exactly_float(x)) {
      raise(ErrorKind::ConfigInvalid,
            "float32 batch holds a value that is not an exact float promotion (row " +
                std::to_string(idx / batch.dim()) + ")");
    }
  }
  if (batch.normalized) {
    const double tol = unit_norm_tolerance(batch.float_width);
    for (std::size_t i = 0; i < batch.n(); ++i) {
      const double norm = l2_norm(batch.data.row(i), batch.dim());
      if (std::abs(norm - 1.0) > tol) {
        raise(ErrorKind::NormalizationMismatch,
              "row " + std::to_string(i) + " has norm " + std::to_string(norm) +
                  " but the batch is flagged normalized");
      }
    }
  }
  if (batch.labels && batch.labels->size() != batch.n()) {
    raise(ErrorKind::DimensionMismatch, "label array length does not match row count");
  }
}

FeatureBatch load_batch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());

  char magic[8];
  io::read_bytes(in, magic, sizeof magic, ErrorKind::MalformedHeader, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    raise(ErrorKind::MalformedHeader, path.string() + ": bad magic");
  }
  const auto version = io::read_le<uint32_t>(in, ErrorKind::MalformedHeader, "version");
  if (version != kVersion) {
    raise(ErrorKind::MalformedHeader,
          path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto n = io::read_le<uint64_t>(in, ErrorKind::MalformedHeader, "row count");
  const auto dim = io::read_le<uint32_t>(in, ErrorKind::MalformedHeader, "dimension");
  const auto width = io::read_le<uint8_t>(in, ErrorKind::MalformedHeader, "float width");
  const auto flags = io::read_le<uint8_t>(in, ErrorKind::MalformedHeader, "flags");

  if (n == 0 || dim == 0) raise(ErrorKind::MalformedHeader, path.string() + ": zero dimensions");
  if (n > std::numeric_limits<uint32_t>::max()) {
    raise(ErrorKind::MalformedHeader, path.string() + ": row count exceeds index range");
  }
  if (width != 4 && width != 8) {
    raise(ErrorKind::MalformedHeader,
          path.string() + ": float width " + std::to_string(width));
  }
  if (flags & ~(kFlagNormalized | kFlagHasLabels)) {
    raise(ErrorKind::MalformedHeader, path.string() + ": unknown flag bits");
  }
  const std::size_t elems_max = std::numeric_limits<std::size_t>::max() / 8;
  if (static_cast<std::size_t>(n) > elems_max / dim) {
    raise(ErrorKind::MalformedHeader, path.string() + ": payload size overflows");
  }

  FeatureBatch batch;
  batch.float_width = width;
  batch.normalized = (flags & kFlagNormalized) != 0;
  batch.data = Matrix(static_cast<std::size_t>(n), dim);

  const std::size_t count = batch.data.data.size();
  if (width == 8) {
    io::read_bytes(in, batch.data.data.data(), count * sizeof(double),
                   ErrorKind::TruncatedPayload, "feature payload");
  } else {
    std::vector<float> raw(count);
    io::read_bytes(in, raw.data(), count * sizeof(float), ErrorKind::TruncatedPayload,
                   "feature payload");
    for (std::size_t i = 0; i < count; ++i) batch.data.data[i] = raw[i];
  }

  if (flags & kFlagHasLabels) {
    std::vector<uint32_t> labels(batch.n());
    io::read_bytes(in, labels.data(), labels.size() * sizeof(uint32_t),
                   ErrorKind::TruncatedPayload, "label payload");
    batch.labels = std::move(labels);
  }

  if (in.peek() != std::char_traits<char>::eof()) {
    raise(ErrorKind::MalformedHeader, path.string() + ": trailing bytes after payload");
  }

  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(batch.data.data[i])) {
      raise(ErrorKind::NonFiniteValue,
            path.string() + ": non-finite value at element " + std::to_string(i));
    }
  }
  if (batch.normalized) {
    const double tol = unit_norm_tolerance(width);
    for (std::size_t i = 0; i < batch.n(); ++i) {
      const double norm = l2_norm(batch.data.row(i), batch.dim());
      if (std::abs(norm - 1.0) > tol) {
        raise(ErrorKind::NormalizationMismatch,
              path.string() + ": row " + std::to_string(i) +
                  " violates the stored normalized flag");
      }
    }
  }
  return batch;
}

void save_batch(const FeatureBatch& batch, const std::filesystem::path& path) {
  validate_batch(batch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");

  io::write_bytes(out, kMagic, sizeof kMagic);
  io::write_le<uint32_t>(out, kVersion);
  io::write_le<uint64_t>(out, batch.n());
  io::write_le<uint32_t>(out, static_cast<uint32_t>(batch.dim()));
  io::write_le<uint8_t>(out, batch.float_width);
  uint8_t flags = 0;
  if (batch.normalized) flags |= kFlagNormalized;
  if (batch.labels) flags |= kFlagHasLabels;
  io::write_le<uint8_t>(out, flags);

  if (batch.float_width == 8) {
    io::write_bytes(out, batch.data.data.data(), batch.data.data.size() * sizeof(double));
  } else {
    std::vector<float> raw(batch.data.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = static_cast<float>(batch.data.data[i]);
    }
    io::write_bytes(out, raw.data(), raw.size() * sizeof(float));
  }
  if (batch.labels) {
    io::write_bytes(out, batch.labels->data(), batch.labels->size() * sizeof(uint32_t));
  }
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

FeatureBatch normalize(const FeatureBatch& batch) {
  FeatureBatch out = batch;
  for (std::size_t i = 0; i < out.n(); ++i) {
    double* row = out.data.row(i);
    const double norm = l2_norm(row, out.dim());
    if (norm == 0.0) {
      raise(ErrorKind::ZeroVector, "row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t d = 0; d < out.dim(); ++d) {
      double v = row[d] / norm;
      if (out.float_width == 4) v = static_cast<double>(static_cast<float>(v));
      row[d] = v;
    }
  }
  out.normalized = true;
  return out;
}

FeatureBatch as_float32(const FeatureBatch& batch) {
  FeatureBatch out = batch;
  out.float_width = 4;
  for (double& v : out.data.data) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::pair<FeatureBatch, std::vector<uint32_t>> subsample(const FeatureBatch& batch,
                                                         const SubsampleSpec& spec) {
  if (!(spec.ratio > 0.0) || spec.ratio > 1.0) {
    raise(ErrorKind::ConfigInvalid, "subsample ratio must lie in (0, 1]");
  }
  const auto m = static_cast<std::size_t>(
      std::floor(spec.ratio * static_cast<double>(batch.n())));
  if (m < 1) {
    raise(ErrorKind::ConfigInvalid, "subsample ratio keeps zero rows");
  }

  Rng rng(spec.seed);
  const std::vector<uint32_t> picked = rng.sample_without_replacement(
      static_cast<uint32_t>(batch.n()), static_cast<uint32_t>(m));

  FeatureBatch out;
  out.float_width = batch.float_width;
  out.normalized = batch.normalized;
  out.data = Matrix(m, batch.dim());
  std::vector<uint32_t> index_map(m);
  if (batch.labels) out.labels = std::vector<uint32_t>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t src = picked[r];
    index_map[r] = static_cast<uint32_t>(src);
    std::copy_n(batch.data.row(src), batch.dim(), out.data.row(r));
    if (batch.labels) (*out.labels)[r] = (*batch.labels)[src];
  }
  return {std::move(out), std::move(index_map)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  tokens.push_back(cur);
  for (auto& t : tokens) {
    const auto first = t.find_first_not_of(" \t\r");
    const auto last = t.find_last_not_of(" \t\r");
    t = first == std::string::npos ? std::string() : t.substr(first, last - first + 1);
  }
  return tokens;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && !s.empty();
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

FeatureBatch import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
  bool has_label_column = false;
  bool saw_header = false;
  std::size_t columns = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto tokens = split_csv_line(line);
    if (rows.empty() && !saw_header) {
      // A first line with any non-numeric token is a header.
      bool numeric = true;
      for (const auto& t : tokens) {
        double v;
        if (!parse_double(t, v)) {
          numeric = false;
          break;
        }
      }
      if (!numeric) {
        saw_header = true;
        columns = tokens.size();
        has_label_column = lowercase(tokens.back()) == "label";
        continue;
      }
    }
    if (columns == 0) columns = tokens.size();
    if (tokens.size() != columns) {
      raise(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) +
                                       ": expected " + std::to_string(columns) +
                                       " fields, got " + std::to_string(tokens.size()));
    }
    rows.push_back(std::move(tokens));
    row_lines.push_back(line_no);
  }

  if (rows.empty()) raise(ErrorKind::ParseError, path.string() + ": no data rows");
  const std::size_t dim = columns - (has_label_column ? 1 : 0);
  if (dim == 0) raise(ErrorKind::ParseError, path.string() + ": no feature columns");

  FeatureBatch batch;
  batch.data = Matrix(rows.size(), dim);
  if (has_label_column) batch.labels = std::vector<uint32_t>(rows.size());

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& tokens = rows[r];
    const std::string where = path.string() + ":" + std::to_string(row_lines[r]);
    for (std::size_t c = 0; c < dim; ++c) {
      double v;
      if (!parse_double(tokens[c], v)) {
        raise(ErrorKind::ParseError, where + ": cannot parse '" + tokens[c] + "'");
      }
      if (!std::isfinite(v)) {
        raise(ErrorKind::NonFiniteValue, where + ": non-finite value");
      }
      batch.data.at(r, c) = v;
    }
    if (has_label_column) {
      int64_t lab = 0;
      const auto& t = tokens[dim];
      const auto res = std::from_chars(t.data(), t.data() + t.size(), lab);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
        raise(ErrorKind::ParseError, where + ": cannot parse label '" + t + "'");
      }
      if (lab < 0 || lab > std::numeric_limits<uint32_t>::max()) {
        raise(ErrorKind::ParseError, where + ": label out of range");
      }
      (*batch.labels)[r] = static_cast<uint32_t>(lab);
    }
  }
  return batch;
}

}  // namespace ppap
