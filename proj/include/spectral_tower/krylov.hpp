#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace spectral_tower {

/// Applies a symmetric operator to every column of `in`, writing `out`
/// (already sized n x in.cols()).
using BlockOperator = std::function<void(const Eigen::MatrixXd& in, Eigen::MatrixXd& out)>;

enum class ConvergenceRule {
  /// ‖Op y - θ y‖ <= tol·|θ| for every wanted pair.
  each_relative,
  /// ‖Op y - θ y‖ <= tol·|θ_max|; suits operators whose wanted spectrum
  /// reaches down to zero (finite-rank differences).
  dominant_relative,
};

struct KrylovOptions {
  int block_size = 4;
  int max_basis = 64;
  int max_restarts = 300;
  double tol = 1e-10;
  ConvergenceRule rule = ConvergenceRule::dominant_relative;
  std::uint64_t seed = 20240611;
};

struct KrylovResult {
  Eigen::VectorXd values;     // non-increasing |value|
  Eigen::MatrixXd vectors;    // Euclidean-orthonormal columns
  Eigen::VectorXd residuals;  // ‖Op y - θ y‖
  int applications = 0;
  int restarts = 0;
  bool exhausted = false;     // an invariant subspace was reached; Ritz pairs are exact
};

/// Thick-restarted block Lanczos (full reorthogonalization) for the nev
/// eigenpairs of largest magnitude of a symmetric operator of dimension n.
/// Deterministic for a fixed seed; throws NonConvergenceError after
/// max_restarts restarts.
KrylovResult dominant_eigenpairs(Eigen::Index n, const BlockOperator& op, int nev, const KrylovOptions& options);

/// Reproducible uniform[-1, 1) block from a 64-bit seed.
Eigen::MatrixXd seeded_block(Eigen::Index n, Eigen::Index cols, std::uint64_t seed);

}  // namespace spectral_tower
