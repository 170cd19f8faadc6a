#include <doctest.h>

#include <omp.h>

#include <random>

#include "spectral_tower/discretize.hpp"
#include "spectral_tower/kernels.hpp"

using namespace spectral_tower;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  auto spec = tower_from_halfwidths({Dyadic(1), Dyadic(2)}, {Dyadic::ratio(1, 4)});
  auto d = assemble(spec, 2, 1, Dyadic::ratio(1, 16));
  const auto& a = d.op.csr();
  const std::size_t n = d.grid.size();
  auto x = random_vector(n, 1);
  auto y = random_vector(n, 2);

  std::vector<double> ys(n), yp(n);
  kernels::serial::spmv(a, x, ys);
  kernels::parallel::spmv(a, x, yp);
  CHECK(ys == yp);

  CHECK(kernels::parallel::dot(x, y) == doctest::Approx(kernels::serial::dot(x, y)).epsilon(1e-13));
  CHECK(kernels::parallel::norm2(x) == doctest::Approx(kernels::serial::norm2(x)).epsilon(1e-13));

  auto s = y, p = y;
  kernels::serial::axpy(0.5, x, s);
  kernels::parallel::axpy(0.5, x, p);
  CHECK(s == p);

  const std::size_t k = 5;
  auto block = random_vector(n * k, 3);
  std::vector<double> cs(k), cp(k);
  kernels::serial::gemv_t(block.data(), n, k, x, cs);
  kernels::parallel::gemv_t(block.data(), n, k, x, cp);
  for (std::size_t j = 0; j < k; ++j) CHECK(cp[j] == doctest::Approx(cs[j]).epsilon(1e-13));

  s = x;
  p = x;
  kernels::serial::gemv_sub(block.data(), n, k, cs, s);
  kernels::parallel::gemv_sub(block.data(), n, k, cs, p);
  for (std::size_t i = 0; i < n; ++i) CHECK(p[i] == doctest::Approx(s[i]).epsilon(1e-13));
}

TEST_CASE("parallel reductions do not depend on the thread count") {
  auto x = random_vector(100003, 4);
  auto y = random_vector(100003, 5);
  const double reference = kernels::parallel::dot(x, y);
  for (int t : {1, 2, 3, 7}) {
    omp_set_num_threads(t);
    CHECK(kernels::parallel::dot(x, y) == reference);
  }
  omp_set_num_threads(kernels::max_threads());
}
