#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spectral_tower::kernels {

/// Compressed sparse row storage.
struct CsrMatrix {
  int rows = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> cols;
  std::vector<double> values;

  std::size_t nonzeros() const { return values.size(); }
};

/// Reads SPECTRAL_TOWER_THREADS and caps the OpenMP team size accordingly.
/// Returns the resulting maximum thread count.
int configure_threads();
int max_threads();

// Block arguments are column-major n x k arrays (Eigen's default layout).

/// Reference implementations. Plain loops, fixed summation order.
namespace serial {
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
void gemv_t(const double* v, std::size_t n, std::size_t k, std::span<const double> w, std::span<double> coeffs);
void gemv_sub(const double* v, std::size_t n, std::size_t k, std::span<const double> coeffs, std::span<double> w);
}  // namespace serial

/// OpenMP kernels. Reductions are split into a fixed number of row chunks
/// whose partial sums are combined in chunk order, so results do not depend
/// on the thread count.
namespace parallel {
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
void gemv_t(const double* v, std::size_t n, std::size_t k, std::span<const double> w, std::span<double> coeffs);
void gemv_sub(const double* v, std::size_t n, std::size_t k, std::span<const double> coeffs, std::span<double> w);
}  // namespace parallel

using parallel::axpy;
using parallel::dot;
using parallel::gemv_sub;
using parallel::gemv_t;
using parallel::norm2;
using parallel::scale;
using parallel::spmv;

}  // namespace spectral_tower::kernels
