// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spectral_tower/construction.hpp"
#include "spectral_tower/discretize.hpp"
#include "spectral_tower/geometry.hpp"
#include "spectral_tower/kernels.hpp"
#include "spectral_tower/quasimode.hpp"
#include "spectral_tower/report.hpp"
#include "spectral_tower/spectral.hpp"

using namespace spectral_tower;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Dyadic frac(std::int64_t num, std::int64_t den) { return Dyadic::ratio(num, den); }

// Two-cube benchmark a = (1, 17/8) and its copy scaled by 1/4, small enough
// for dense linear algebra (1314 nodes at h = 1/32).
TowerSpec standard_benchmark(const Dyadic& delta) { return TowerSpec({Dyadic(1), frac(17, 8)}, {delta}); }
TowerSpec compact_benchmark(const Dyadic& delta) {
  return TowerSpec({frac(1, 4), frac(17, 32)}, {delta}, frac(1, 4));
}

std::string str(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

double ulp_distance(double a, double b) { return std::abs(a - b) / std::max(std::nextafter(std::abs(b), INFINITY) - std::abs(b), 1e-300); }

Eigen::MatrixXd dense_power_difference(const Discretization& big, const Discretization& small, int power) {
  const auto n = static_cast<Eigen::Index>(big.grid.size());
  const auto ns = static_cast<Eigen::Index>(small.grid.size());
  const Eigen::MatrixXd rb = (big.op.to_dense() + Eigen::MatrixXd::Identity(n, n)).inverse();
  const Eigen::MatrixXd rs = (small.op.to_dense() + Eigen::MatrixXd::Identity(ns, ns)).inverse();
  Eigen::MatrixXd pb = rb, ps = rs;
  for (int p = 1; p < power; ++p) {
    pb = pb * rb;
    ps = ps * rs;
  }
  const Embedding e(small.grid, big.grid);
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index j = 0; j < ns; ++j)
      pb(static_cast<Eigen::Index>(e.map()[i]), static_cast<Eigen::Index>(e.map()[j])) -= ps(i, j);
  return pb;
}

// Shared construction run for criteria 4, 7, 9 and 10.
struct ConstructionRun {
  std::optional<ConstructionTrace> trace;
  std::string error;
  double seconds = 0.0;
};

ConstructionRun& construction_run() {
  static ConstructionRun run = [] {
    ConstructionRun r;
    ConstructionConfig config;
    config.epsilon = 0.1;
    config.cubes = 4;
    config.a1 = Dyadic(1);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.trace = run_construction(config);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return run;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const TowerSpec cube({Dyadic(1)}, {});
  std::vector<double> hs, errs;
  double rel64 = 0.0;
  for (int inv : {16, 32, 64}) {
    const auto disc = assemble(cube, 1, 0, frac(1, inv));
    const double lambda = lowest_eigenpairs(disc.op, 1)[0].value;
    const double err = std::abs(lambda - kPi2 / 2);
    hs.push_back(1.0 / inv);
    errs.push_back(err);
    if (inv == 64) rel64 = err / (kPi2 / 2);
  }
  const double order = *loglog_slope(hs, errs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {rel64 < 0.01 && order >= 1.8 && order <= 2.2 && secs < 10.0,
          "rel. error at h=1/64 " + str(rel64) + ", order " + str(order) + ", " + str(secs) + " s"};
}

Outcome criterion2() {
  const Dyadic h = frac(1, 32);
  std::vector<std::vector<double>> lowest;
  double worst = 0.0;
  std::size_t nodes = 0;
  for (int m : {1, 2, 4, 8}) {
    const TowerSpec spec = compact_benchmark(h * m);
    const auto disc = assemble(spec, 2, 1, h);
    nodes = std::max(nodes, disc.grid.size());
    const auto pairs = lowest_eigenpairs(disc.op, 5);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(disc.op.to_dense(), Eigen::EigenvaluesOnly);
    std::vector<double> v;
    for (std::size_t k = 0; k < 5; ++k) {
      v.push_back(pairs[k].value);
      worst = std::max(worst, std::abs(pairs[k].value - dense.eigenvalues()(static_cast<Eigen::Index>(k))));
    }
    lowest.push_back(v);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < lowest.size(); ++i)
    for (std::size_t k = 0; k < 5; ++k) monotone = monotone && lowest[i][k] <= lowest[i - 1][k] * (1 + 1e-12);
  return {monotone && worst <= 1e-8 && nodes <= 2500,
          std::string(monotone ? "non-increasing" : "NOT monotone") + " over delta in {h,2h,4h,8h}, dense discrepancy " +
              str(worst) + ", " + std::to_string(nodes) + " nodes"};
}

Outcome criterion3() {
  std::vector<double> dl, dp;
  const std::vector<std::pair<Dyadic, Dyadic>> ladder = {
      {frac(1, 4), frac(1, 16)}, {frac(1, 8), frac(1, 32)}, {frac(1, 16), frac(1, 64)}, {frac(1, 32), frac(1, 128)}};
  for (const auto& [delta, h] : ladder) {
    const TowerSpec spec = standard_benchmark(delta);
    const auto closed = assemble(spec, 1, 0, h);
    const auto ground = lowest_eigenpairs(closed.op, 1)[0];
    const auto open = assemble(spec, 2, 1, h);
    const auto ref = Embedding(closed.grid, open.grid).embed(ground.vector);
    const auto tracked = track_eigenpair(open.op, ref, ground.value - 1.0, ground.value + 0.1);
    double s = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) s += std::pow(tracked.pair.vector[i] - ref[i], 2);
    dl.push_back(std::abs(tracked.pair.value - ground.value));
    dp.push_back(std::sqrt(open.grid.cell_volume() * s));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < dl.size(); ++i) decreasing = decreasing && dl[i] < dl[i - 1] && dp[i] < dp[i - 1];

  ConstructionConfig config;  // ε = 0.1, so ε₁ = 0.05
  ConstructionState state = initial_step(config);
  bool searched = false;
  std::string search;
  try {
    const auto rec = search_window(state, frac(17, 8), 1, 0.05 * state.lambda1, config);
    searched = rec.eps_n == 0.05;
    search = "search accepted delta = " + rec.delta.str() + " at h = " + rec.h.str();
  } catch (const std::exception& e) {
    search = std::string("search failed: ") + e.what();
  }
  std::string trail = "dlambda";
  for (double v : dl) trail += " " + str(v);
  trail += "; dpsi";
  for (double v : dp) trail += " " + str(v);
  return {decreasing && searched, trail + "; " + search};
}

Outcome criterion4() {
  auto& run = construction_run();
  if (!run.trace) return {false, "construction failed: " + run.error};
  const auto& t = *run.trace;
  const auto v = verify_uniform_bounds(t);
  const auto& last = t.steps.back();
  bool steps_ok = t.steps.size() == 3;
  for (const auto& s : t.steps)
    steps_ok = steps_ok && s.d_lambda >= -1e-10 * s.lambda && s.d_lambda <= s.eps_n && s.d_psi <= s.eps_n &&
               s.lambda <= s.lambda_ref;
  const bool bounds = last.lambda >= last.lambda1 - 0.1 && last.lambda <= last.lambda1 && last.loc1 >= 0.9;
  return {steps_ok && bounds && v.passed && run.seconds < 600.0,
          "lambda_1 = " + str(last.lambda1) + ", lambda_4 = " + str(last.lambda) + ", mass on first cube " +
              str(last.loc1) + ", verdicts " + (v.passed ? "all true" : "FAILED") + ", " + str(run.seconds) + " s"};
}

Outcome criterion5() {
  const Dyadic h = frac(1, 32);
  const TowerSpec spec = standard_benchmark(frac(1, 8));
  const auto diff = resolvent_difference(assemble(spec, 2, 1, h), assemble(spec, 2, 0, h), 1);
  double worst = 0.0;
  std::string detail;
  for (int ell : {2, 3, 5}) {
    const double r = telescoping_residual(diff, ell, 10, 20240611);
    worst = std::max(worst, r);
    detail += "l=" + std::to_string(ell) + ": " + str(r) + " ";
  }
  return {worst <= 1e-11, detail};
}

Outcome criterion6() {
  const Dyadic h = frac(1, 32);
  const TowerSpec spec = compact_benchmark(frac(1, 8));
  const auto big = assemble(spec, 2, 1, h);
  const auto small = assemble(spec, 2, 0, h);
  const auto diff = resolvent_difference(big, small, 1);
  const std::size_t k = 2 * window_face_nodes(big.grid, 0) + 4;
  const auto est = power_difference_trace_norm(diff, 2, k);
  const Eigen::MatrixXd d = dense_power_difference(big, small, 2);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  const double dense_total = svd.singularValues().sum();
  const double dense_partial = svd.singularValues().head(static_cast<Eigen::Index>(k)).sum();
  const double err_total = std::abs(est.total() - dense_total);
  const double err_partial = std::abs(est.partial - dense_partial);

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd b(20, 20), kk(20, 20);
    for (Eigen::Index i = 0; i < 400; ++i) {
      b.data()[i] = u(rng);
      kk.data()[i] = u(rng);
    }
    const Eigen::VectorXd sbk = Eigen::JacobiSVD<Eigen::MatrixXd>(b * kk).singularValues();
    const Eigen::VectorXd sk = Eigen::JacobiSVD<Eigen::MatrixXd>(kk).singularValues();
    const double nb = Eigen::JacobiSVD<Eigen::MatrixXd>(b).singularValues()(0);
    for (Eigen::Index j = 0; j < 20; ++j)
      if (sbk(j) > nb * sk(j) * (1 + 1e-12) + 1e-13) ++violations;
  }
  return {err_total <= 1e-6 && err_partial <= 1e-6 && big.grid.size() <= 2000 && violations == 0,
          "trace norm " + str(est.total()) + " vs dense " + str(dense_total) + " (diff " + str(err_total) +
              ", partial diff " + str(err_partial) + ", n = " + std::to_string(big.grid.size()) +
              "); s_k(BK) <= |B| s_k(K) violations: " + std::to_string(violations) + "/100 pairs"};
}

Outcome criterion7() {
  auto& run = construction_run();
  if (!run.trace) return {false, "construction failed: " + run.error};
  bool ok = true;
  std::string detail;
  for (const auto& s : run.trace->steps) {
    const double thr = std::max(std::ldexp(1.0, -s.n), run.trace->config.norm_floor);
    ok = ok && std::isfinite(s.res_norm) && std::isfinite(s.trace_norm) && s.res_norm <= thr && s.trace_norm <= thr &&
         s.norm_threshold == thr;
    detail += "n=" + std::to_string(s.n) + ": " + str(s.res_norm) + "/" + str(s.trace_norm) + " <= " + str(thr) + "  ";
  }
  return {ok, detail};
}

Outcome criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  const TowerSpec spec({Dyadic(1), Dyadic(2), Dyadic(4), Dyadic(8), Dyadic(16)},
                       {frac(1, 4), frac(1, 4), frac(1, 4), frac(1, 4)});
  const auto wave = residual_scan(spec, kPi2 / 2, {3, 4, 5});
  const auto bump = residual_scan(spec, 0.0, {3, 4, 5});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double s1 = wave.slope.value_or(0.0), s0 = bump.slope.value_or(0.0);
  return {s1 >= -1.2 && s1 <= -0.8 && s0 >= -2.3 && s0 <= -1.7 && secs < 120.0,
          "slope at pi^2/2: " + str(s1) + ", slope at 0: " + str(s0) + ", " + str(secs) + " s"};
}

Outcome criterion9() {
  auto& run = construction_run();
  if (!run.trace) return {false, "construction failed: " + run.error};
  const auto& t = *run.trace;
  const auto scaled = replay(t, Dyadic(2));
  double worst = ulp_distance(scaled.lambda1, 0.25 * t.lambda1);
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    worst = std::max(worst, ulp_distance(scaled.lambda[k], 0.25 * t.steps[k].lambda));
    worst = std::max(worst, ulp_distance(scaled.lambda_ref[k], 0.25 * t.steps[k].lambda_ref));
  }
  return {worst <= 1.0, "max deviation from lambda/4: " + str(worst) + " ulp over " +
                            std::to_string(2 * t.steps.size() + 1) + " values"};
}

Outcome criterion10() {
  auto& run = construction_run();
  if (!run.trace) return {false, "construction failed: " + run.error};
  const auto path = std::filesystem::temp_directory_path() / "spectral_tower_acceptance_trace.json";
  write_json(path, to_json(*run.trace));
  const auto loaded = trace_from_json(read_json(path));
  std::filesystem::remove(path);
  const auto r = replay(loaded);
  double worst = std::abs(r.lambda1 - run.trace->lambda1);
  for (std::size_t k = 0; k < loaded.steps.size(); ++k)
    worst = std::max({worst, std::abs(r.lambda[k] - run.trace->steps[k].lambda),
                      std::abs(r.lambda_ref[k] - run.trace->steps[k].lambda_ref)});
  return {worst <= 1e-10 && loaded.steps.size() == run.trace->steps.size(),
          "saved trace replayed, max deviation " + str(worst)};
}

}  // namespace

int main() {
  kernels::configure_threads();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 analytic spectrum", criterion1},     {"2 domain monotonicity", criterion2},
      {"3 perturbation vanishing", criterion3}, {"4 full construction", criterion4},
      {"5 telescoping identity", criterion5},  {"6 Schatten machinery", criterion6},
      {"7 norm conditions", criterion7},       {"8 quasi-mode filling", criterion8},
      {"9 rescaling", criterion9},             {"10 determinism", criterion10},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
