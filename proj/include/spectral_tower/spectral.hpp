#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "spectral_tower/discretize.hpp"
#include "spectral_tower/krylov.hpp"

namespace spectral_tower {

/// Eigenvalue with a grid function of unit grid-L² norm.
struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;
  /// ‖A v - λ v‖ / ‖v‖.
  double residual = 0.0;
  /// Distance to the nearest other computed eigenvalue (infinity if none).
  double multiplicity_gap = std::numeric_limits<double>::infinity();
};

struct EigenSolverOptions {
  /// Residual target relative to the operator bound: ‖Av - λv‖ <= tol·‖A‖.
  double tol = 1e-10;
  int block_size = 4;
  int max_basis = 64;
  std::uint64_t seed = 20240611;
};

/// m smallest eigenpairs (non-decreasing), shift-invert about zero.
std::vector<EigenPair> lowest_eigenpairs(const SparseSymmetricOperator& a, int m,
                                         const EigenSolverOptions& options = {});

/// m eigenpairs closest to `shift`, ordered by distance to it. The factor of
/// A - shift·I is retried with a perturbed shift on breakdown.
std::vector<EigenPair> eigenpairs_near(const SparseSymmetricOperator& a, double shift, int m,
                                       const EigenSolverOptions& options = {});

struct TrackedPair {
  EigenPair pair;
  /// Signed grid inner product with the reference after sign alignment (>= 0).
  double overlap = 0.0;
  /// Eigenvalues found inside the window, ascending.
  std::vector<double> window_values;
};

struct TrackingOptions {
  EigenSolverOptions solver;
  int initial_count = 6;
  int max_count = 64;
  double min_overlap = 0.5;
};

/// Among the eigenpairs with value in [lo, hi], the one with the largest
/// |⟨v, reference⟩|. Throws BranchLostError when the window is empty or the
/// best overlap is below min_overlap.
TrackedPair track_eigenpair(const SparseSymmetricOperator& a, std::span<const double> reference, double lo,
                            double hi, const TrackingOptions& options = {});

/// Distance from lambda to the other eigenvalues of `pairs`; the pair closest
/// to lambda is taken as lambda itself.
double simplicity_gap(const std::vector<EigenPair>& pairs, double lambda);
double simplicity_gap(const std::vector<double>& values, double lambda);

/// Cached sparse Cholesky factor of A + I.
class Resolvent {
 public:
  explicit Resolvent(const SparseSymmetricOperator& a);

  std::size_t size() const { return n_; }
  void apply(std::span<const double> b, std::span<double> x) const;
  std::vector<double> apply(std::span<const double> b) const;
  /// Columnwise (A + I)^{-power}.
  void apply_block(const Eigen::MatrixXd& in, Eigen::MatrixXd& out, int power = 1) const;

 private:
  std::size_t n_ = 0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

/// Solves (A + I)x = b with one step of iterative refinement.
std::vector<double> apply_resolvent(const SparseSymmetricOperator& a, std::span<const double> b);

/// Matrix-free D_ℓ = R_big^ℓ - E R_small^ℓ Eᵀ acting on the larger grid.
/// A null small resolvent stands for the empty domain.
class ResolventDifference {
 public:
  ResolventDifference(std::shared_ptr<const Resolvent> big, std::shared_ptr<const Resolvent> small,
                      std::shared_ptr<const Embedding> embedding, int power = 1);

  std::size_t size() const { return big_->size(); }
  int power() const { return power_; }
  const Resolvent& big() const { return *big_; }
  const Resolvent* small() const { return small_.get(); }
  const Embedding* embedding() const { return embedding_.get(); }

  ResolventDifference with_power(int power) const;

  void apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const;
  std::vector<double> apply(std::span<const double> v) const;
  BlockOperator as_block_operator() const;

 private:
  std::shared_ptr<const Resolvent> big_;
  std::shared_ptr<const Resolvent> small_;
  std::shared_ptr<const Embedding> embedding_;
  int power_ = 1;
};

ResolventDifference resolvent_difference(const Discretization& big, const Discretization& small, int power = 1);

struct NormOptions {
  double tol = 1e-10;
  int block_size = 4;
  std::uint64_t seed = 20240611;
};

/// Largest |eigenvalue| of a symmetric difference operator.
double operator_norm(const ResolventDifference& d, const NormOptions& options = {});

struct SingularSpectrum {
  std::vector<double> values;  // non-increasing
  double tail_bound = 0.0;     // upper bound on Σ_{j>k} s_j
  std::size_t k = 0;

  double partial_sum() const;
  double total() const { return partial_sum() + tail_bound; }
};

/// Optional decay model: maps the computed values and the dimension to a tail bound.
using TailModel = std::function<double(const std::vector<double>& values, std::size_t dimension)>;

/// k largest singular values of a symmetric operator. The default tail bound
/// is (n - k)·s_k.
SingularSpectrum singular_values(const ResolventDifference& d, std::size_t k, const NormOptions& options = {},
                                 const TailModel& tail_model = {});

struct TraceNormEstimate {
  double partial = 0.0;
  double tail = 0.0;
  SingularSpectrum spectrum;
  double total() const { return partial + tail; }
};

TraceNormEstimate power_difference_trace_norm(const ResolventDifference& d, int power, std::size_t k,
                                              const NormOptions& options = {});

/// Max relative discrepancy of A^ℓ - B^ℓ = Σ_k A^{ℓ-k}(A - B)B^{k-1} with
/// A = R_big, B = E R_small Eᵀ, over `probes` seeded random vectors.
double telescoping_residual(const ResolventDifference& d, int power, int probes = 10,
                            std::uint64_t seed = 20240611);

struct WeylOptions {
  /// Use the full dense spectrum up to this dimension.
  std::size_t dense_limit = 2500;
  /// Eigenvalues computed on the sparse path before the tail model takes over.
  int computed = 48;
  /// Domain area for the tail model; <= 0 means size·cell_volume.
  double area = 0.0;
  EigenSolverOptions solver;
};

struct WeylTraceEstimate {
  double partial = 0.0;
  double tail = 0.0;
  std::size_t eigenvalues_used = 0;
  bool dense = false;
  double total() const { return partial + tail; }
};

/// Σ_m (1 + λ_m)^{-ℓ}: exact on the dense path, otherwise computed
/// eigenvalues plus the model λ_m ≈ 4πm/|Ω| for the rest.
WeylTraceEstimate weyl_trace_estimate(const SparseSymmetricOperator& a, int power, const WeylOptions& options = {});

}  // namespace spectral_tower
