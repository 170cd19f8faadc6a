#include "spectral_tower/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spectral_tower/errors.hpp"
#include "spectral_tower/kernels.hpp"

namespace spectral_tower {

namespace {

std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// LDLᵀ factor of A - shift·I used as the shift-invert operator.
class ShiftedFactor {
 public:
  ShiftedFactor(const SparseSymmetricOperator& a, double shift) {
    ldlt_.compute(a.to_eigen(shift));
    if (ldlt_.info() != Eigen::Success) throw FactorizationError("LDLT factorization of A - shift I failed");
    const auto& d = ldlt_.vectorD();
    const double floor = 1e-14 * (a.bound() + std::abs(shift));
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (!std::isfinite(d(i)) || std::abs(d(i)) <= floor)
        throw FactorizationError("near-singular pivot in LDLT factor (shift too close to an eigenvalue)");
  }

  void solve(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const {
    bool finite = true;
#pragma omp parallel for schedule(dynamic) reduction(&& : finite)
    for (Eigen::Index j = 0; j < in.cols(); ++j) {
      out.col(j) = ldlt_.solve(in.col(j));
      finite = finite && out.col(j).allFinite();
    }
    if (!finite) throw FactorizationError("non-finite shift-invert solution");
  }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

void orient(std::vector<double>& v) {
  std::size_t pivot = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[pivot])) pivot = i;
  if (!v.empty() && v[pivot] < 0.0)
    for (auto& x : v) x = -x;
}

std::vector<EigenPair> solve_near(const SparseSymmetricOperator& a, double shift, int m,
                                  const EigenSolverOptions& options) {
  const auto n = static_cast<Eigen::Index>(a.size());
  if (n == 0 || m <= 0) return {};
  m = static_cast<int>(std::min<Eigen::Index>(m, n));
  const double target = options.tol * a.bound();
  const double weight = 1.0 / std::sqrt(a.cell_volume());

  std::string last_error;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const double s = shift + attempt * 1e-7 * (a.bound() + std::abs(shift));
    try {
      ShiftedFactor factor(a, s);
      KrylovOptions ko;
      ko.block_size = options.block_size;
      ko.max_basis = options.max_basis;
      ko.seed = options.seed;
      ko.rule = ConvergenceRule::each_relative;
      ko.tol = options.tol * a.bound() / (a.bound() + std::abs(s));
      const BlockOperator op = [&factor](const Eigen::MatrixXd& in, Eigen::MatrixXd& out) { factor.solve(in, out); };

      for (int tighten = 0; tighten < 3; ++tighten) {
        const KrylovResult kr = dominant_eigenpairs(n, op, m, ko);
        std::vector<EigenPair> pairs;
        double worst = 0.0;
        Eigen::VectorXd ay(n), y(n);
        for (Eigen::Index k = 0; k < kr.vectors.cols(); ++k) {
          y = kr.vectors.col(k);
          a.apply(span_of(y), span_of(ay));
          const double yy = kernels::dot(span_of(y), span_of(y));
          const double lambda = kernels::dot(span_of(y), span_of(ay)) / yy;
          ay -= lambda * y;
          EigenPair p;
          p.value = lambda;
          p.residual = kernels::norm2(span_of(ay)) / std::sqrt(yy);
          worst = std::max(worst, p.residual);
          p.vector.resize(static_cast<std::size_t>(n));
          const double scale = weight / std::sqrt(yy);
          for (Eigen::Index i = 0; i < n; ++i) p.vector[static_cast<std::size_t>(i)] = y(i) * scale;
          orient(p.vector);
          pairs.push_back(std::move(p));
        }
        if (worst <= target || kr.exhausted) {
          std::stable_sort(pairs.begin(), pairs.end(), [shift](const EigenPair& x, const EigenPair& z) {
            const double dx = std::abs(x.value - shift), dz = std::abs(z.value - shift);
            if (dx != dz) return dx < dz;
            return x.value < z.value;
          });
          for (auto& p : pairs) {
            for (const auto& q : pairs)
              if (&p != &q) p.multiplicity_gap = std::min(p.multiplicity_gap, std::abs(p.value - q.value));
          }
          return pairs;
        }
        ko.tol *= 1e-2;
      }
      throw NonConvergenceError("eigenpair residuals above tolerance " + std::to_string(target));
    } catch (const FactorizationError& e) {
      last_error = e.what();
    }
  }
  throw FactorizationError("shift-invert failed after retries: " + last_error);
}

}  // namespace

std::vector<EigenPair> lowest_eigenpairs(const SparseSymmetricOperator& a, int m, const EigenSolverOptions& options) {
  if (m < 1) throw ValidationError("lowest_eigenpairs: need m >= 1");
  auto pairs = solve_near(a, 0.0, m, options);
  std::stable_sort(pairs.begin(), pairs.end(), [](const EigenPair& x, const EigenPair& z) { return x.value < z.value; });
  return pairs;
}

std::vector<EigenPair> eigenpairs_near(const SparseSymmetricOperator& a, double shift, int m,
                                       const EigenSolverOptions& options) {
  if (m < 1) throw ValidationError("eigenpairs_near: need m >= 1");
  return solve_near(a, shift, m, options);
}

TrackedPair track_eigenpair(const SparseSymmetricOperator& a, std::span<const double> reference, double lo,
                            double hi, const TrackingOptions& options) {
  if (!(lo < hi)) throw ValidationError("track_eigenpair: empty search window");
  if (reference.size() != a.size()) throw ValidationError("track_eigenpair: reference has the wrong length");
  const double ref_norm = std::sqrt(a.cell_volume() * kernels::dot(reference, reference));
  if (std::abs(ref_norm - 1.0) > 1e-8)
    throw ValidationError("track_eigenpair: reference must have unit norm (got " + std::to_string(ref_norm) + ")");

  const double shift = 0.5 * (lo + hi);
  int count = std::max(1, options.initial_count);
  std::vector<EigenPair> pairs;
  for (;;) {
    pairs = eigenpairs_near(a, shift, count, options.solver);
    const bool all_inside = std::all_of(pairs.begin(), pairs.end(), [&](const EigenPair& p) {
      return p.value >= lo && p.value <= hi;
    });
    if (!all_inside || pairs.size() >= a.size() || count >= options.max_count) break;
    count = std::min(2 * count, options.max_count);
  }

  TrackedPair out;
  const EigenPair* best = nullptr;
  double best_overlap = -1.0;
  for (const auto& p : pairs) {
    if (p.value < lo || p.value > hi) continue;
    out.window_values.push_back(p.value);
    const double overlap = a.cell_volume() * kernels::dot(p.vector, reference);
    if (std::abs(overlap) > best_overlap) {
      best_overlap = std::abs(overlap);
      best = &p;
    }
  }
  std::sort(out.window_values.begin(), out.window_values.end());
  if (best == nullptr)
    throw EmptyWindowError("empty window: no eigenvalue in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  if (best_overlap < options.min_overlap)
    throw BranchLostError("branch lost: best overlap " + std::to_string(best_overlap) + " < " +
                          std::to_string(options.min_overlap) + "; shrink the window or refine the grid");
  out.pair = *best;
  if (a.cell_volume() * kernels::dot(out.pair.vector, reference) < 0.0)
    for (auto& x : out.pair.vector) x = -x;
  out.overlap = best_overlap;
  return out;
}

double simplicity_gap(const std::vector<double>& values, double lambda) {
  if (values.empty()) return std::numeric_limits<double>::infinity();
  std::size_t self = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (std::abs(values[i] - lambda) < std::abs(values[self] - lambda)) self = i;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (i != self) gap = std::min(gap, std::abs(values[i] - lambda));
  return gap;
}

double simplicity_gap(const std::vector<EigenPair>& pairs, double lambda) {
  std::vector<double> values;
  values.reserve(pairs.size());
  for (const auto& p : pairs) values.push_back(p.value);
  return simplicity_gap(values, lambda);
}

Resolvent::Resolvent(const SparseSymmetricOperator& a) : n_(a.size()) {
  if (n_ == 0) return;
  llt_.compute(a.to_eigen(-1.0));
  if (llt_.info() != Eigen::Success) throw FactorizationError("Cholesky factorization of A + I failed");
}

void Resolvent::apply(std::span<const double> b, std::span<double> x) const {
  if (n_ == 0) return;
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::Map<Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  xv = llt_.solve(bv);
}

std::vector<double> Resolvent::apply(std::span<const double> b) const {
  std::vector<double> x(n_);
  apply(b, x);
  return x;
}

void Resolvent::apply_block(const Eigen::MatrixXd& in, Eigen::MatrixXd& out, int power) const {
  out = in;
  if (n_ == 0) return;
  for (int p = 0; p < power; ++p) {
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = llt_.solve(out.col(j));
  }
}

std::vector<double> apply_resolvent(const SparseSymmetricOperator& a, std::span<const double> b) {
  if (b.size() != a.size()) throw ValidationError("apply_resolvent: vector length mismatch");
  const Resolvent r(a);
  std::vector<double> x = r.apply(b);
  // One refinement step: x += R (b - (A + I) x).
  std::vector<double> residual = a.apply(x);
  for (std::size_t i = 0; i < x.size(); ++i) residual[i] = b[i] - residual[i] - x[i];
  const std::vector<double> correction = r.apply(residual);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += correction[i];
  return x;
}

ResolventDifference::ResolventDifference(std::shared_ptr<const Resolvent> big, std::shared_ptr<const Resolvent> small,
                                         std::shared_ptr<const Embedding> embedding, int power)
    : big_(std::move(big)), small_(std::move(small)), embedding_(std::move(embedding)), power_(power) {
  if (!big_) throw ValidationError("resolvent difference needs the larger operator");
  if (power_ < 1) throw ValidationError("resolvent power must be >= 1");
  if (small_) {
    if (!embedding_) throw ValidationError("resolvent difference needs an embedding");
    if (embedding_->large_size() != big_->size() || embedding_->small_size() != small_->size())
      throw ValidationError("nesting violation: embedding does not match the operators");
  }
}

ResolventDifference ResolventDifference::with_power(int power) const {
  return ResolventDifference(big_, small_, embedding_, power);
}

void ResolventDifference::apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const {
  big_->apply_block(in, out, power_);
  if (!small_) return;
  const auto ns = static_cast<Eigen::Index>(small_->size());
  Eigen::MatrixXd restricted(ns, in.cols());
  for (Eigen::Index j = 0; j < in.cols(); ++j)
    embedding_->restrict_to({in.col(j).data(), static_cast<std::size_t>(in.rows())},
                            {restricted.col(j).data(), static_cast<std::size_t>(ns)});
  Eigen::MatrixXd solved;
  small_->apply_block(restricted, solved, power_);
  const auto& map = embedding_->map();
  for (Eigen::Index j = 0; j < in.cols(); ++j)
    for (Eigen::Index k = 0; k < ns; ++k) out(static_cast<Eigen::Index>(map[static_cast<std::size_t>(k)]), j) -= solved(k, j);
}

std::vector<double> ResolventDifference::apply(std::span<const double> v) const {
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  Eigen::MatrixXd out;
  apply(in, out);
  return {out.data(), out.data() + out.size()};
}

BlockOperator ResolventDifference::as_block_operator() const {
  return [self = *this](const Eigen::MatrixXd& in, Eigen::MatrixXd& out) { self.apply(in, out); };
}

ResolventDifference resolvent_difference(const Discretization& big, const Discretization& small, int power) {
  auto embedding = std::make_shared<Embedding>(small.grid, big.grid);
  return ResolventDifference(std::make_shared<Resolvent>(big.op), std::make_shared<Resolvent>(small.op),
                             std::move(embedding), power);
}

double operator_norm(const ResolventDifference& d, const NormOptions& options) {
  KrylovOptions ko;
  ko.block_size = options.block_size;
  ko.tol = options.tol;
  ko.seed = options.seed;
  ko.rule = ConvergenceRule::dominant_relative;
  const auto kr = dominant_eigenpairs(static_cast<Eigen::Index>(d.size()), d.as_block_operator(), 1, ko);
  return kr.values.size() ? std::abs(kr.values(0)) : 0.0;
}

double SingularSpectrum::partial_sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

SingularSpectrum singular_values(const ResolventDifference& d, std::size_t k, const NormOptions& options,
                                 const TailModel& tail_model) {
  const std::size_t n = d.size();
  if (k > n) throw ValidationError("singular_values: k = " + std::to_string(k) + " exceeds dimension " + std::to_string(n));
  SingularSpectrum out;
  out.k = k;
  if (k == 0) {
    out.tail_bound = 0.0;
    return out;
  }
  KrylovOptions ko;
  ko.block_size = options.block_size;
  ko.tol = options.tol;
  ko.seed = options.seed;
  ko.rule = ConvergenceRule::dominant_relative;
  ko.max_basis = static_cast<int>(std::max<std::size_t>(64, 2 * k + 8));
  const auto kr = dominant_eigenpairs(static_cast<Eigen::Index>(n), d.as_block_operator(), static_cast<int>(k), ko);
  for (Eigen::Index i = 0; i < kr.values.size(); ++i) out.values.push_back(std::abs(kr.values(i)));
  while (out.values.size() < k) out.values.push_back(0.0);
  std::sort(out.values.begin(), out.values.end(), std::greater<>());
  out.tail_bound = tail_model ? tail_model(out.values, n) : static_cast<double>(n - k) * out.values.back();
  if (out.tail_bound < 0.0) out.tail_bound = 0.0;
  return out;
}

TraceNormEstimate power_difference_trace_norm(const ResolventDifference& d, int power, std::size_t k,
                                              const NormOptions& options) {
  if (power < 1) throw ValidationError("trace norm power must be >= 1");
  TraceNormEstimate out;
  out.spectrum = singular_values(d.with_power(power), k, options);
  out.partial = out.spectrum.partial_sum();
  out.tail = out.spectrum.tail_bound;
  return out;
}

double telescoping_residual(const ResolventDifference& d, int power, int probes, std::uint64_t seed) {
  if (power < 1) throw ValidationError("telescoping_residual: power must be >= 1");
  const auto n = static_cast<Eigen::Index>(d.size());
  const Eigen::MatrixXd v = seeded_block(n, probes, seed);
  // A u and B u for blocks, with A = R_big and B = E R_small Eᵀ.
  auto apply_a = [&](const Eigen::MatrixXd& in) {
    Eigen::MatrixXd out;
    d.big().apply_block(in, out, 1);
    return out;
  };
  const ResolventDifference one = d.with_power(1);
  auto apply_b = [&](const Eigen::MatrixXd& in) {
    Eigen::MatrixXd diff;
    one.apply(in, diff);
    return Eigen::MatrixXd(apply_a(in) - diff);
  };

  // Left side: A^ℓ v - B^ℓ v.
  Eigen::MatrixXd a_pow = v, b_pow = v;
  for (int p = 0; p < power; ++p) {
    a_pow = apply_a(a_pow);
    b_pow = apply_b(b_pow);
  }
  const Eigen::MatrixXd lhs = a_pow - b_pow;

  // Right side: Σ_{k=1}^{ℓ} A^{ℓ-k} (A - B) B^{k-1} v.
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, probes);
  Eigen::MatrixXd b_k = v;  // B^{k-1} v
  for (int k = 1; k <= power; ++k) {
    Eigen::MatrixXd term = apply_a(b_k) - apply_b(b_k);
    for (int p = 0; p < power - k; ++p) term = apply_a(term);
    rhs += term;
    if (k < power) b_k = apply_b(b_k);
  }

  double worst = 0.0;
  for (Eigen::Index j = 0; j < probes; ++j) {
    const double scale = lhs.col(j).norm();
    const double err = (lhs.col(j) - rhs.col(j)).norm();
    worst = std::max(worst, scale > 0.0 ? err / scale : err);
  }
  return worst;
}

WeylTraceEstimate weyl_trace_estimate(const SparseSymmetricOperator& a, int power, const WeylOptions& options) {
  if (power < 1) throw ValidationError("weyl_trace_estimate: power must be >= 1");
  WeylTraceEstimate out;
  const std::size_t n = a.size();
  if (n == 0) return out;
  if (n <= options.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.to_dense(), Eigen::EigenvaluesOnly);
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
      out.partial += std::pow(1.0 + eig.eigenvalues()(i), -power);
    out.eigenvalues_used = n;
    out.dense = true;
    return out;
  }
  if (power < 2)
    throw ValidationError("weyl_trace_estimate: the Weyl tail Σ(1 + 4πm/|Ω|)^{-ℓ} diverges for ℓ < 2 in two dimensions");
  const int m = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.computed)), n));
  const auto pairs = lowest_eigenpairs(a, m, options.solver);
  for (const auto& p : pairs) out.partial += std::pow(1.0 + p.value, -power);
  out.eigenvalues_used = pairs.size();
  const double area = options.area > 0.0 ? options.area : static_cast<double>(n) * a.cell_volume();
  const double c = 4.0 * std::numbers::pi / area;
  // Σ_{j=m+1}^{n} (1 + c j)^{-ℓ} <= ∫_m^n (1 + c x)^{-ℓ} dx.
  const double lo = std::pow(1.0 + c * static_cast<double>(pairs.size()), 1.0 - power);
  const double hi = std::pow(1.0 + c * static_cast<double>(n), 1.0 - power);
  out.tail = (lo - hi) / (c * (power - 1));
  return out;
}

}  // namespace spectral_tower
