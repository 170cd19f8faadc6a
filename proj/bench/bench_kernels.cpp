// Serial reference kernels against the OpenMP versions on a large
// five-point Laplacian. Usage: bench_kernels [cube_halfwidth_in_cells] [reps]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "spectral_tower/discretize.hpp"
#include "spectral_tower/kernels.hpp"
#include "spectral_tower/krylov.hpp"

using namespace spectral_tower;

namespace {

double seconds(const std::function<void()>& f, int reps) {
  f();
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void row(const char* name, double ts, double tp, double diff) {
  std::printf("%-10s %12.3e %12.3e %8.2fx   max diff %.2e\n", name, ts, tp, ts / tp, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const int cells = argc > 1 ? std::atoi(argv[1]) : 512;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  const int threads = kernels::configure_threads();

  const TowerSpec spec({Dyadic(cells)}, {});
  const auto disc = assemble(spec, 1, 0, Dyadic(1));
  const auto& a = disc.op.csr();
  const std::size_t n = disc.grid.size();
  const int k = 8;
  std::printf("nodes %zu, nonzeros %zu, threads %d, reps %d\n", n, a.nonzeros(), threads, reps);
  std::printf("%-10s %12s %12s %9s\n", "kernel", "serial [s]", "parallel [s]", "speedup");

  const Eigen::MatrixXd block = seeded_block(static_cast<Eigen::Index>(n), k + 1, 7);
  const std::span<const double> x(block.col(0).data(), n), y0(block.col(1).data(), n);
  std::vector<double> ys(n), yp(n);

  const double t_spmv_s = seconds([&] { kernels::serial::spmv(a, x, ys); }, reps);
  const double t_spmv_p = seconds([&] { kernels::parallel::spmv(a, x, yp); }, reps);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(ys[i] - yp[i]));
  row("spmv", t_spmv_s, t_spmv_p, d);

  double ds = 0.0, dp = 0.0;
  const double t_dot_s = seconds([&] { ds = kernels::serial::dot(x, y0); }, reps);
  const double t_dot_p = seconds([&] { dp = kernels::parallel::dot(x, y0); }, reps);
  row("dot", t_dot_s, t_dot_p, std::abs(ds - dp));

  std::vector<double> cs(k), cp(k);
  const double* v = block.data() + n;
  const double t_gt_s = seconds([&] { kernels::serial::gemv_t(v, n, k, x, cs); }, reps);
  const double t_gt_p = seconds([&] { kernels::parallel::gemv_t(v, n, k, x, cp); }, reps);
  d = 0.0;
  for (int i = 0; i < k; ++i) d = std::max(d, std::abs(cs[i] - cp[i]));
  row("gemv_t", t_gt_s, t_gt_p, d);

  std::vector<double> ws(x.begin(), x.end()), wp(x.begin(), x.end());
  const double t_gs_s = seconds([&] { kernels::serial::gemv_sub(v, n, k, cs, ws); }, reps);
  const double t_gs_p = seconds([&] { kernels::parallel::gemv_sub(v, n, k, cs, wp); }, reps);
  d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(ws[i] - wp[i]));
  row("gemv_sub", t_gs_s, t_gs_p, d);
  return 0;
}
