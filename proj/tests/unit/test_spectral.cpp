#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "spectral_tower/errors.hpp"
#include "spectral_tower/spectral.hpp"

using namespace spectral_tower;

namespace {

constexpr double kPi = std::numbers::pi;

Dyadic q(std::int64_t num, std::int64_t den = 1) { return Dyadic::ratio(num, den); }

TowerSpec unit_cube() { return tower_from_halfwidths({q(1)}, {}); }
TowerSpec two_cubes() { return tower_from_halfwidths({q(1), q(2)}, {q(1, 4)}); }

// Five-point eigenvalues of a square of side 2a with m = 2a/h cells per side.
double discrete_cube_eigenvalue(double a, double h, int k, int l) {
  const double sk = std::sin(k * kPi * h / (4.0 * a));
  const double sl = std::sin(l * kPi * h / (4.0 * a));
  return 4.0 / (h * h) * (sk * sk + sl * sl);
}

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

Eigen::Map<const Eigen::VectorXd> view(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// Dense D_ℓ = (A_big + I)^{-ℓ} - E (A_small + I)^{-ℓ} Eᵀ.
Eigen::MatrixXd dense_difference(const Discretization& big, const Discretization& small, int power) {
  const auto nb = static_cast<Eigen::Index>(big.grid.size());
  const auto ns = static_cast<Eigen::Index>(small.grid.size());
  Eigen::MatrixXd rb = (big.op.to_dense() + Eigen::MatrixXd::Identity(nb, nb)).inverse();
  Eigen::MatrixXd rs = (small.op.to_dense() + Eigen::MatrixXd::Identity(ns, ns)).inverse();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(nb, ns);
  Embedding emb(small.grid, big.grid);
  for (Eigen::Index j = 0; j < ns; ++j) e(static_cast<Eigen::Index>(emb.map()[j]), j) = 1.0;
  Eigen::MatrixXd pb = Eigen::MatrixXd::Identity(nb, nb), ps = Eigen::MatrixXd::Identity(ns, ns);
  for (int p = 0; p < power; ++p) {
    pb = pb * rb;
    ps = ps * rs;
  }
  return pb - e * ps * e.transpose();
}

std::vector<double> dense_singular_values(const Eigen::MatrixXd& d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
  std::vector<double> s(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  for (auto& x : s) x = std::abs(x);
  std::sort(s.rbegin(), s.rend());
  return s;
}

}  // namespace

TEST_CASE("lowest eigenpairs of a cube match the separable discrete spectrum") {
  const double h = 1.0 / 16.0;
  auto d = assemble(unit_cube(), 1, 0, q(1, 16));
  auto pairs = lowest_eigenpairs(d.op, 4);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].value == doctest::Approx(discrete_cube_eigenvalue(1, h, 1, 1)).epsilon(1e-11));
  CHECK(pairs[1].value == doctest::Approx(discrete_cube_eigenvalue(1, h, 1, 2)).epsilon(1e-11));
  CHECK(pairs[2].value == doctest::Approx(discrete_cube_eigenvalue(1, h, 2, 1)).epsilon(1e-11));
  CHECK(pairs[3].value == doctest::Approx(discrete_cube_eigenvalue(1, h, 2, 2)).epsilon(1e-11));
  for (const auto& p : pairs) {
    CHECK(l2_norm(d.grid, p.vector) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.residual <= 1e-10 * d.op.bound());
  }
  CHECK(pairs[0].value == doctest::Approx(kPi * kPi / 2.0).epsilon(2e-3));
  CHECK(pairs[0].value <= kPi * kPi / 2.0);
}

TEST_CASE("eigenvalues scale with the inverse square of the length") {
  auto small = lowest_eigenpairs(assemble(unit_cube(), 1, 0, q(1, 8)).op, 1);
  auto big = lowest_eigenpairs(assemble(rescale(unit_cube(), q(2)), 1, 0, q(1, 4)).op, 1);
  CHECK(big[0].value == doctest::Approx(small[0].value / 4.0).epsilon(1e-12));
  auto a2 = lowest_eigenpairs(assemble(tower_from_halfwidths({q(2)}, {}), 1, 0, q(1, 16)).op, 1);
  CHECK(a2[0].value == doctest::Approx(kPi * kPi / 8.0).epsilon(1e-3));
}

TEST_CASE("tracking on a disconnected domain returns the extended eigenfunction") {
  auto spec = tower_from_halfwidths({q(1), q(17, 8)}, {q(1, 4)});
  auto one = assemble(spec, 1, 0, q(1, 8));
  auto closed = assemble(spec, 2, 0, q(1, 8));
  auto psi = lowest_eigenpairs(one.op, 1)[0];
  auto ref = embed(one.grid, closed.grid, psi.vector);
  auto t = track_eigenpair(closed.op, ref, psi.value - 0.2, psi.value + 0.2);
  CHECK(t.pair.value == doctest::Approx(psi.value).epsilon(1e-10));
  CHECK(t.overlap == doctest::Approx(1.0).epsilon(1e-9));
  double diff = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) diff = std::max(diff, std::abs(ref[i] - t.pair.vector[i]));
  CHECK(diff < 1e-8);
}

TEST_CASE("tracking errors") {
  auto d = assemble(unit_cube(), 1, 0, q(1, 8));
  auto pairs = lowest_eigenpairs(d.op, 2);
  const double l1 = pairs[0].value;
  CHECK_THROWS_AS(track_eigenpair(d.op, pairs[1].vector, l1 - 0.5, l1 + 0.5), BranchLostError);
  CHECK_THROWS_AS(track_eigenpair(d.op, pairs[0].vector, l1 + 1.0, l1 + 2.0), EmptyWindowError);
}

TEST_CASE("simplicity gap") {
  auto d = assemble(unit_cube(), 1, 0, q(1, 16));
  auto pairs = lowest_eigenpairs(d.op, 4);
  const double h = 1.0 / 16.0;
  CHECK(simplicity_gap(pairs, pairs[0].value) ==
        doctest::Approx(discrete_cube_eigenvalue(1, h, 1, 2) - discrete_cube_eigenvalue(1, h, 1, 1)).epsilon(1e-9));
  CHECK(simplicity_gap(pairs, pairs[1].value) < 1e-9);
  CHECK(simplicity_gap(std::vector<double>{1.0, 1.0, 3.0}, 1.0) == 0.0);
}

TEST_CASE("apply_resolvent") {
  auto d = assemble(unit_cube(), 1, 0, q(1, 16));
  auto psi = lowest_eigenpairs(d.op, 1)[0];
  auto x = apply_resolvent(d.op, psi.vector);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(psi.vector[i] / (1.0 + psi.value)).epsilon(1e-9));

  std::vector<double> zero(d.grid.size(), 0.0);
  auto z = apply_resolvent(d.op, zero);
  CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));

  auto b = random_vector(d.grid.size(), 3);
  auto y = apply_resolvent(d.op, b);
  auto ay = d.op.apply(y);
  Eigen::VectorXd r = view(ay) + view(y) - view(b);
  CHECK(r.norm() / view(b).norm() <= 1e-12);
  CHECK(view(y).norm() <= view(b).norm());
}

TEST_CASE("resolvent difference of identical domains vanishes") {
  auto spec = two_cubes();
  auto closed = assemble(spec, 2, 0, q(1, 8));
  auto d = resolvent_difference(closed, closed);
  CHECK(operator_norm(d) == 0.0);
  auto s = singular_values(d, 5);
  for (double v : s.values) CHECK(v == 0.0);
  CHECK(s.tail_bound == 0.0);
  CHECK(power_difference_trace_norm(d, 2, 5).total() == 0.0);
}

TEST_CASE("resolvent difference is symmetric and matches the dense oracle") {
  auto spec = two_cubes();
  auto open = assemble(spec, 2, 1, q(1, 8));
  auto closed = assemble(spec, 2, 0, q(1, 8));
  REQUIRE(open.grid.size() <= 2000);
  auto d = resolvent_difference(open, closed);

  auto u = random_vector(open.grid.size(), 1);
  auto v = random_vector(open.grid.size(), 2);
  auto du = d.apply(u);
  auto dv = d.apply(v);
  CHECK(std::abs(view(du).dot(view(v)) - view(u).dot(view(dv))) <= 1e-12 * view(u).norm() * view(v).norm());

  Eigen::MatrixXd dense = dense_difference(open, closed, 1);
  auto s_ref = dense_singular_values(dense);
  CHECK(operator_norm(d) == doctest::Approx(s_ref[0]).epsilon(1e-8));

  auto s = singular_values(d, 8);
  REQUIRE(s.values.size() == 8);
  CHECK(std::is_sorted(s.values.rbegin(), s.values.rend()));
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(s.values[k] - s_ref[k]) <= 1e-10 * s_ref[0]);
  CHECK(s.tail_bound == doctest::Approx((open.grid.size() - 8) * s.values[7]));

  Eigen::MatrixXd dense2 = dense_difference(open, closed, 2);
  double trace_ref = 0.0;
  for (double x : dense_singular_values(dense2)) trace_ref += x;
  auto t = power_difference_trace_norm(d, 2, 2 * window_face_nodes(open.grid, 0) + 4);
  CHECK(std::abs(t.total() - trace_ref) <= 1e-6);
}

TEST_CASE("resolvent norm against the empty domain") {
  auto d = assemble(unit_cube(), 1, 0, q(1, 8));
  ResolventDifference r(std::make_shared<Resolvent>(d.op), nullptr, nullptr);
  auto l1 = lowest_eigenpairs(d.op, 1)[0].value;
  CHECK(operator_norm(r) == doctest::Approx(1.0 / (1.0 + l1)).epsilon(1e-9));
}

TEST_CASE("nesting violation is rejected") {
  auto spec = two_cubes();
  auto open = assemble(spec, 2, 1, q(1, 8));
  auto closed = assemble(spec, 2, 0, q(1, 8));
  CHECK_THROWS_AS(resolvent_difference(closed, open), ValidationError);
}

TEST_CASE("singular values bound the product") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd b(12, 12), k(12, 12);
    for (Eigen::Index i = 0; i < 12; ++i)
      for (Eigen::Index j = 0; j < 12; ++j) {
        b(i, j) = g(gen);
        k(i, j) = g(gen);
      }
    Eigen::JacobiSVD<Eigen::MatrixXd> sbk(b * k), sb(b), sk(k);
    for (Eigen::Index j = 0; j < 12; ++j)
      CHECK(sbk.singularValues()(j) <= sb.singularValues()(0) * sk.singularValues()(j) * (1.0 + 1e-12));
  }
}

TEST_CASE("telescoping identity") {
  auto spec = two_cubes();
  auto open = assemble(spec, 2, 1, q(1, 8));
  auto closed = assemble(spec, 2, 0, q(1, 8));
  auto d = resolvent_difference(open, closed);
  CHECK(telescoping_residual(d, 1) <= 1e-15);
  CHECK(telescoping_residual(d, 2) <= 1e-12);
  CHECK(telescoping_residual(d, 3) <= 1e-12);
  CHECK(telescoping_residual(d, 5) <= 1e-11);
}

TEST_CASE("weyl trace estimate on a cube matches the discrete double sum") {
  const double h = 1.0 / 8.0;
  auto d = assemble(unit_cube(), 1, 0, q(1, 8));
  auto w = weyl_trace_estimate(d.op, 2);
  CHECK(w.dense);
  CHECK(w.tail == 0.0);
  double ref = 0.0;
  for (int k = 1; k < 16; ++k)
    for (int l = 1; l < 16; ++l) ref += std::pow(1.0 + discrete_cube_eigenvalue(1, h, k, l), -2.0);
  CHECK(w.total() == doctest::Approx(ref).epsilon(1e-12));

  // Continuum double sum, truncated with an integral tail bound.
  double cont = 0.0;
  const int m = 400;
  for (int k = 1; k <= m; ++k)
    for (int l = 1; l <= m; ++l) cont += std::pow(1.0 + kPi * kPi / 4.0 * (k * k + l * l), -2.0);
  CHECK(ref == doctest::Approx(cont).epsilon(0.05));
}

TEST_CASE("weyl estimate is monotone in the window") {
  const auto h = q(1, 8);
  double previous = 0.0;
  for (auto delta : {q(1, 8), q(1, 4), q(1, 2), q(1)}) {
    auto spec = tower_from_halfwidths({q(1), q(2)}, {delta});
    double w = weyl_trace_estimate(assemble(spec, 2, 1, h).op, 2).total();
    CHECK(w >= previous);
    previous = w;
  }
}

TEST_CASE("weyl tail model refuses divergent powers") {
  auto d = assemble(unit_cube(), 1, 0, q(1, 8));
  WeylOptions options;
  options.dense_limit = 0;
  options.computed = 8;
  CHECK_THROWS_AS(weyl_trace_estimate(d.op, 1, options), ValidationError);
  auto w = weyl_trace_estimate(d.op, 2, options);
  CHECK_FALSE(w.dense);
  CHECK(w.tail > 0.0);
}
