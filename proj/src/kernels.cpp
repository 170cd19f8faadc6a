#include "spectral_tower/kernels.hpp"

#include <omp.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <string>

namespace spectral_tower::kernels {

namespace {

// Reductions always use this many chunks; below kParallelMin the chunks are
// processed by one thread, which gives the same sums.
constexpr std::size_t kChunks = 64;
constexpr std::size_t kParallelMin = 8192;

std::size_t chunk_begin(std::size_t c, std::size_t n) { return c * n / kChunks; }

}  // namespace

int configure_threads() {
  if (const char* env = std::getenv("SPECTRAL_TOWER_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) omp_set_num_threads(static_cast<int>(cap));
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

namespace serial {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) s += a.values[p] * x[a.cols[p]];
    y[i] = s;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
  for (auto& v : x) v *= alpha;
}

void gemv_t(const double* v, std::size_t n, std::size_t k, std::span<const double> w, std::span<double> coeffs) {
  for (std::size_t j = 0; j < k; ++j) coeffs[j] = dot({v + j * n, n}, w);
}

void gemv_sub(const double* v, std::size_t n, std::size_t k, std::span<const double> coeffs, std::span<double> w) {
  for (std::size_t j = 0; j < k; ++j) axpy(-coeffs[j], {v + j * n, n}, w);
}

}  // namespace serial

namespace parallel {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static) if (a.rows > static_cast<int>(kParallelMin))
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) s += a.values[p] * x[a.cols[p]];
    y[i] = s;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::array<double, kChunks> partial{};
#pragma omp parallel for schedule(static) if (n > kParallelMin)
  for (std::size_t c = 0; c < kChunks; ++c) {
    double s = 0.0;
    for (std::size_t i = chunk_begin(c, n); i < chunk_begin(c + 1, n); ++i) s += x[i] * y[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n > kParallelMin)
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n > kParallelMin)
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void gemv_t(const double* v, std::size_t n, std::size_t k, std::span<const double> w, std::span<double> coeffs) {
  std::vector<double> partial(kChunks * k, 0.0);
#pragma omp parallel for schedule(static) if (n * k > kParallelMin)
  for (std::size_t c = 0; c < kChunks; ++c) {
    const std::size_t lo = chunk_begin(c, n);
    const std::size_t hi = chunk_begin(c + 1, n);
    for (std::size_t j = 0; j < k; ++j) {
      const double* col = v + j * n;
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += col[i] * w[i];
      partial[c * k + j] = s;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    double total = 0.0;
    for (std::size_t c = 0; c < kChunks; ++c) total += partial[c * k + j];
    coeffs[j] = total;
  }
}

void gemv_sub(const double* v, std::size_t n, std::size_t k, std::span<const double> coeffs, std::span<double> w) {
#pragma omp parallel for schedule(static) if (n * k > kParallelMin)
  for (std::size_t c = 0; c < kChunks; ++c) {
    const std::size_t lo = chunk_begin(c, n);
    const std::size_t hi = chunk_begin(c + 1, n);
    for (std::size_t j = 0; j < k; ++j) {
      const double* col = v + j * n;
      const double cj = coeffs[j];
      for (std::size_t i = lo; i < hi; ++i) w[i] -= cj * col[i];
    }
  }
}

}  // namespace parallel

}  // namespace spectral_tower::kernels
