#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ppap {

// Dense row-major matrix of doubles. All similarity math runs on this
// representation regardless of the on-disk float width.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool empty() const { return rows == 0 || cols == 0; }
};

// Reference dot product: strict left-to-right accumulation. Every similarity
// in the library reduces in exactly this order.
double dot(const double* a, const double* b, std::size_t n);
inline double dot(std::span<const double> a, std::span<const double> b) {
  return dot(a.data(), b.data(), a.size());
}

double l2_norm(const double* v, std::size_t n);
inline double l2_norm(std::span<const double> v) { return l2_norm(v.data(), v.size()); }

// out[j] = dot(query, m.row(j)) for every row. Interleaves independent rows
// for throughput but keeps each row's accumulation order identical to dot().
void row_similarities(const Matrix& m, const double* query, double* out);
std::vector<double> row_similarities(const Matrix& m, std::span<const double> query);

}  // namespace ppap
