#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "spectral_tower/discretize.hpp"
#include "spectral_tower/errors.hpp"

using namespace spectral_tower;

namespace {

Dyadic q(std::int64_t num, std::int64_t den = 1) { return Dyadic::ratio(num, den); }

double dense_lowest(const SparseSymmetricOperator& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.to_dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

TowerSpec two_cubes() { return tower_from_halfwidths({q(1), q(2)}, {q(1, 4)}); }

}  // namespace

TEST_CASE("unit cube at h = 1/2") {
  auto spec = tower_from_halfwidths({q(1)}, {});
  auto d = assemble(spec, 1, 0, q(1, 2));
  REQUIRE(d.grid.size() == 9);
  auto m = d.op.to_dense();
  for (int i = 0; i < 9; ++i) CHECK(m(i, i) == 16.0);
  CHECK(d.op.symmetric());
  CHECK((m - m.transpose()).norm() == 0.0);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      if (i != j) CHECK((m(i, j) == 0.0 || m(i, j) == -4.0));
  // Discrete sine spectrum: (4/h²)(sin²(π h/4) + sin²(π h/4)) for the lowest mode.
  const double h = 0.5;
  const double s = std::sin(std::numbers::pi * h / 4.0);
  CHECK(dense_lowest(d.op) == doctest::Approx(8.0 / (h * h) * s * s).epsilon(1e-13));
}

TEST_CASE("lowest eigenvalue converges at second order") {
  auto spec = tower_from_halfwidths({q(1)}, {});
  const double exact = std::numbers::pi * std::numbers::pi / 2.0;
  std::vector<double> err;
  for (int den : {4, 8, 16}) err.push_back(std::abs(dense_lowest(assemble(spec, 1, 0, q(1, den)).op) - exact));
  CHECK(err[0] / err[1] >= 3.5);
  CHECK(err[0] / err[1] <= 4.5);
  CHECK(err[1] / err[2] >= 3.5);
  CHECK(err[1] / err[2] <= 4.5);
}

TEST_CASE("components and window nodes") {
  auto spec = two_cubes();
  const auto h = q(1, 8);
  auto closed = assemble(spec, 2, 0, h);
  auto open = assemble(spec, 2, 1, h);
  CHECK(components(closed.grid) == 2);
  CHECK(components(open.grid) == 1);
  // δ = 2h opens the 2·2 - 1 wall nodes with |y| < δ.
  CHECK(open.grid.size() - closed.grid.size() == 3);
  CHECK(window_face_nodes(open.grid, 0) == 3);

  auto three = tower_from_halfwidths({q(1), q(2), q(3)}, {q(1, 4), q(1, 8)});
  CHECK(components(assemble(three, 3, 2, h).grid) == 1);
  CHECK(components(assemble(three, 3, 1, h).grid) == 2);
}

TEST_CASE("assembly errors") {
  auto spec = two_cubes();
  CHECK_THROWS_AS(assemble(spec, 2, 1, q(1, 2)), ValidationError);
  CHECK_THROWS_AS(assemble(tower_from_halfwidths({q(3, 4)}, {}), 1, 0, q(1, 2)), ValidationError);
  CHECK_THROWS_AS(assemble(spec, 2, 2, q(1, 8)), ValidationError);
  CHECK_THROWS_AS(assemble(spec, 3, 0, q(1, 8)), ValidationError);
}

TEST_CASE("every node lies inside the open set") {
  auto spec = two_cubes();
  auto d = assemble(spec, 2, 1, q(1, 8));
  for (std::size_t k = 0; k < d.grid.size(); ++k) CHECK(contains(spec, 1, d.grid.coordinate(k)));
}

TEST_CASE("embedding is an isometry and restrict is its left inverse") {
  auto spec = two_cubes();
  const auto h = q(1, 8);
  auto one = assemble(spec, 1, 0, h);
  auto closed = assemble(spec, 2, 0, h);
  auto open = assemble(spec, 2, 1, h);
  for (const auto* small : {&one.grid, &closed.grid}) {
    auto v = random_vector(small->size(), 7);
    auto e = embed(*small, open.grid, v);
    CHECK(l2_norm(open.grid, e) == doctest::Approx(l2_norm(*small, v)).epsilon(1e-14));
    CHECK(restrict_to(open.grid, *small, e) == v);
  }
  CHECK_THROWS_AS(Embedding(open.grid, closed.grid), ValidationError);
  CHECK_THROWS_AS(Embedding(one.grid, assemble(spec, 2, 1, q(1, 16)).grid), ValidationError);
}

TEST_CASE("region mass") {
  auto spec = two_cubes();
  const auto h = q(1, 8);
  auto one = assemble(spec, 1, 0, h);
  auto open = assemble(spec, 2, 1, h);
  auto v = random_vector(one.grid.size(), 9);
  const double nv = l2_norm(one.grid, v);
  for (auto& x : v) x /= nv;
  CHECK(region_mass(one.grid, v, Region::full()) == doctest::Approx(1.0).epsilon(1e-14));
  auto e = embed(one.grid, open.grid, v);
  CHECK(region_mass(open.grid, e, Region::cube(1)) == 0.0);
  CHECK(region_mass(open.grid, e, Region::truncated(1).outside()) == 0.0);
  CHECK(region_mass(open.grid, e, Region::cube(0)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("opening a window lowers every eigenvalue") {
  auto spec = two_cubes();
  const auto h = q(1, 4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> closed(assemble(spec, 2, 0, h).op.to_dense(), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> open(assemble(spec, 2, 1, h).op.to_dense(), Eigen::EigenvaluesOnly);
  for (Eigen::Index k = 0; k < closed.eigenvalues().size(); ++k)
    CHECK(open.eigenvalues()(k) <= closed.eigenvalues()(k) + 1e-12);
  CHECK(open.eigenvalues()(0) > 0.0);
}

TEST_CASE("field dump") {
  auto d = assemble(tower_from_halfwidths({q(1)}, {}), 1, 0, q(1, 2));
  std::vector<double> v(d.grid.size(), 1.0);
  std::ostringstream out;
  write_field(out, d.grid, v);
  std::istringstream in(out.str());
  double x, y, value;
  int rows = 0;
  while (in >> x >> y >> value) {
    CHECK(value == 1.0);
    CHECK(x > 0.0);
    CHECK(x < 2.0);
    ++rows;
  }
  CHECK(rows == 9);
}
