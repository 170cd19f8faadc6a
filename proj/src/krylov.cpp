#include "spectral_tower/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>

#include "spectral_tower/errors.hpp"
#include "spectral_tower/kernels.hpp"

namespace spectral_tower {

namespace {

constexpr double kDropTolerance = 1e-10;

// Two passes of classical Gram-Schmidt against basis columns [0, m) and the
// columns accepted so far; columns that lose all but kDropTolerance of their
// norm are deflated.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& basis, Eigen::Index m, const Eigen::MatrixXd& cand,
                               Eigen::Index room) {
  const Eigen::Index n = cand.rows();
  Eigen::MatrixXd accepted(n, std::min<Eigen::Index>(cand.cols(), room));
  Eigen::Index count = 0;
  std::vector<double> coeffs(static_cast<std::size_t>(std::max<Eigen::Index>(m, cand.cols())));
  Eigen::VectorXd w(n);
  for (Eigen::Index c = 0; c < cand.cols() && count < accepted.cols(); ++c) {
    w = cand.col(c);
    std::span<double> ws(w.data(), static_cast<std::size_t>(n));
    const double original = kernels::norm2(ws);
    if (!(original > 0.0) || !std::isfinite(original)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (m > 0) {
        kernels::gemv_t(basis.data(), n, m, ws, {coeffs.data(), static_cast<std::size_t>(m)});
        kernels::gemv_sub(basis.data(), n, m, {coeffs.data(), static_cast<std::size_t>(m)}, ws);
      }
      if (count > 0) {
        kernels::gemv_t(accepted.data(), n, count, ws, {coeffs.data(), static_cast<std::size_t>(count)});
        kernels::gemv_sub(accepted.data(), n, count, {coeffs.data(), static_cast<std::size_t>(count)}, ws);
      }
    }
    const double remaining = kernels::norm2(ws);
    if (remaining <= kDropTolerance * original) continue;
    kernels::scale(1.0 / remaining, ws);
    accepted.col(count++) = w;
  }
  return accepted.leftCols(count);
}

}  // namespace

Eigen::MatrixXd seeded_block(Eigen::Index n, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(n, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = std::ldexp(static_cast<double>(rng() >> 11), -52) - 1.0;
  return out;
}

KrylovResult dominant_eigenpairs(Eigen::Index n, const BlockOperator& op, int nev, const KrylovOptions& options) {
  KrylovResult result;
  if (n == 0 || nev <= 0) {
    result.values.resize(0);
    result.vectors.resize(n, 0);
    result.residuals.resize(0);
    result.exhausted = true;
    return result;
  }
  nev = static_cast<int>(std::min<Eigen::Index>(nev, n));
  const Eigen::Index block = std::clamp<Eigen::Index>(options.block_size, 1, n);
  const Eigen::Index cap =
      std::min<Eigen::Index>(n, std::max<Eigen::Index>(options.max_basis, 2 * nev + 2 * block));

  Eigen::MatrixXd basis(n, cap);
  Eigen::MatrixXd images(n, cap);
  Eigen::MatrixXd projected = Eigen::MatrixXd::Zero(cap, cap);
  Eigen::Index m = 0;
  std::uint64_t injections = 0;

  Eigen::MatrixXd cand = seeded_block(n, block, options.seed);
  Eigen::VectorXd theta;
  Eigen::MatrixXd ritz;  // m x m eigenvectors of the projected matrix, ordered
  bool exhausted = false;

  for (;;) {
    Eigen::MatrixXd fresh = orthonormalize(basis, m, cand, cap - m);
    if (fresh.cols() == 0 && m < nev && m < n) {
      // Krylov space became invariant before holding nev vectors: continue
      // from a new random block.
      ++injections;
      fresh = orthonormalize(basis, m, seeded_block(n, block, options.seed + 0x9e3779b97f4a7c15ULL * injections),
                             cap - m);
    }
    if (fresh.cols() == 0) {
      exhausted = true;
    } else {
      const Eigen::Index p = fresh.cols();
      Eigen::MatrixXd fresh_images(n, p);
      op(fresh, fresh_images);
      result.applications += static_cast<int>(p);
      basis.middleCols(m, p) = fresh;
      images.middleCols(m, p) = fresh_images;
      const Eigen::MatrixXd coupling = basis.leftCols(m + p).transpose() * fresh_images;
      projected.block(0, m, m + p, p) = coupling;
      projected.block(m, 0, p, m) = coupling.topRows(m).transpose();
      m += p;
      cand = std::move(fresh_images);
    }

    const Eigen::MatrixXd t = 0.5 * (projected.topLeftCorner(m, m) + projected.topLeftCorner(m, m).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double fa = std::abs(eig.eigenvalues()(a)), fb = std::abs(eig.eigenvalues()(b));
      if (fa != fb) return fa > fb;
      return eig.eigenvalues()(a) > eig.eigenvalues()(b);
    });
    theta.resize(m);
    ritz.resize(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      theta(k) = eig.eigenvalues()(order[static_cast<std::size_t>(k)]);
      ritz.col(k) = eig.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    }

    const Eigen::Index wanted = std::min<Eigen::Index>(nev, m);
    const Eigen::MatrixXd y = basis.leftCols(m) * ritz.leftCols(wanted);
    Eigen::MatrixXd r = images.leftCols(m) * ritz.leftCols(wanted);
    for (Eigen::Index k = 0; k < wanted; ++k) r.col(k) -= theta(k) * y.col(k);
    Eigen::VectorXd res(wanted);
    for (Eigen::Index k = 0; k < wanted; ++k) res(k) = r.col(k).norm();

    bool converged = wanted == nev;
    const double dominant = std::abs(theta(0));
    for (Eigen::Index k = 0; k < wanted && converged; ++k) {
      const double scale = options.rule == ConvergenceRule::each_relative ? std::abs(theta(k)) : dominant;
      converged = res(k) <= options.tol * scale;
    }

    if (converged || exhausted || m == n) {
      result.values = theta.head(wanted);
      result.vectors = y;
      result.residuals = res;
      result.exhausted = exhausted || m == n;
      return result;
    }

    if (m + block > cap) {
      if (++result.restarts > options.max_restarts)
        throw NonConvergenceError("block Lanczos: no convergence after " + std::to_string(options.max_restarts) +
                                  " restarts (largest residual " + std::to_string(res.maxCoeff()) + ")");
      const Eigen::Index keep = std::min<Eigen::Index>(m, std::max<Eigen::Index>(nev + block, cap / 2));
      const Eigen::MatrixXd z = ritz.leftCols(keep);
      const Eigen::MatrixXd new_basis = basis.leftCols(m) * z;
      const Eigen::MatrixXd new_images = images.leftCols(m) * z;
      const Eigen::MatrixXd new_projected = z.transpose() * projected.topLeftCorner(m, m) * z;
      basis.leftCols(keep) = new_basis;
      images.leftCols(keep) = new_images;
      projected.setZero();
      projected.topLeftCorner(keep, keep) = new_projected;
      m = keep;
      // Expand along the residuals of the leading unconverged Ritz pairs.
      std::vector<Eigen::Index> pick;
      for (Eigen::Index k = 0; k < wanted && static_cast<Eigen::Index>(pick.size()) < block; ++k) {
        const double scale = options.rule == ConvergenceRule::each_relative ? std::abs(theta(k)) : dominant;
        if (res(k) > options.tol * scale) pick.push_back(k);
      }
      for (Eigen::Index k = wanted; k < keep && static_cast<Eigen::Index>(pick.size()) < block; ++k) pick.push_back(k);
      cand.resize(n, static_cast<Eigen::Index>(pick.size()));
      for (std::size_t c = 0; c < pick.size(); ++c) {
        const Eigen::Index k = pick[c];
        cand.col(static_cast<Eigen::Index>(c)) = images.col(k) - theta(k) * basis.col(k);
      }
    }
  }
}

}  // namespace spectral_tower
