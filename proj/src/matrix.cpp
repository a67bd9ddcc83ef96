#include "ppap/matrix.hpp"

#include <cmath>

namespace ppap {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

double l2_norm(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += v[k] * v[k];
  return std::sqrt(acc);
}

namespace {

// Four rows advance in lockstep; each row keeps its own accumulator, so the
// per-row result is bitwise equal to dot().
void dot4(const double* q, const double* r0, const double* r1, const double* r2,
          const double* r3, std::size_t n, double* out) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double qk = q[k];
    a0 += qk * r0[k];
    a1 += qk * r1[k];
    a2 += qk * r2[k];
    a3 += qk * r3[k];
  }
  out[0] = a0;
  out[1] = a1;
  out[2] = a2;
  out[3] = a3;
}

}  // namespace

void row_similarities(const Matrix& m, const double* query, double* out) {
  const std::size_t n = m.rows;
  const std::size_t d = m.cols;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    dot4(query, m.row(i), m.row(i + 1), m.row(i + 2), m.row(i + 3), d, out + i);
  }
  for (; i < n; ++i) out[i] = dot(query, m.row(i), d);
}

std::vector<double> row_similarities(const Matrix& m, std::span<const double> query) {
  std::vector<double> out(m.rows);
  row_similarities(m, query.data(), out.data());
  return out;
}

}  // namespace ppap
