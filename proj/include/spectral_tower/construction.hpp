#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spectral_tower/discretize.hpp"
#include "spectral_tower/dyadic.hpp"
#include "spectral_tower/errors.hpp"
#include "spectral_tower/geometry.hpp"
#include "spectral_tower/spectral.hpp"

namespace spectral_tower {

struct ConstructionConfig {
  double epsilon = 0.1;
  int cubes = 4;
  Dyadic a1{1};
  /// Simplicity gap; <= 0 selects 0.05·λ₁ once λ₁ is known.
  double tau = 0.0;
  int ell = 2;
  Dyadic h0 = Dyadic::ratio(1, 32);
  Dyadic delta_start = Dyadic::ratio(1, 4);
  /// Number of δ halvings allowed per step (coupled h halvings included).
  int max_refinements = 8;
  double norm_floor = 1e-6;
  std::uint64_t seed = 20240611;
  /// Eigen-residual tolerance relative to the operator bound.
  double eig_tol = 1e-10;

  /// Throws ValidationError on violated invariants.
  void validate() const;
  EigenSolverOptions solver() const;
};

ConstructionConfig construction_config_from_keyvalues(const KeyValues& kv);

/// One evaluated (δ, h) candidate of a window search.
struct CandidateRecord {
  Dyadic delta;
  Dyadic h;
  double lambda = 0.0;
  double d_lambda = 0.0;
  double d_psi = 0.0;
  /// Norms are only evaluated when both eigen conditions hold; NaN otherwise.
  double res_norm = 0.0;
  double trace_norm = 0.0;
  bool accepted = false;
  std::string reason;
};

struct StepRecord {
  /// Step index n >= 1: cube n+1 and window n are added.
  int n = 0;
  Dyadic a_next;
  double eps_n = 0.0;
  Dyadic delta;
  Dyadic h;
  /// λ₁ and λ_n recomputed on the accepted grid h.
  double lambda1 = 0.0;
  double lambda_ref = 0.0;
  double lambda = 0.0;
  double overlap = 0.0;
  double d_lambda = 0.0;
  double d_psi = 0.0;
  double loc1 = 0.0;
  /// Grid L² mass outside the first cube.
  double loc_outside = 0.0;
  /// ⟨Aψ, ψ⟩ of the accepted eigenfunction.
  double form_value = 0.0;
  /// Simplicity threshold used for this step (halved from the previous step's
  /// value until an admissible half-width exists).
  double tau = 0.0;
  /// Gap of λ_n in the spectrum of Ω_n ∪ ω_{n+1}.
  double gap = 0.0;
  double res_norm = 0.0;
  double trace_norm = 0.0;
  double trace_partial = 0.0;
  double trace_tail = 0.0;
  std::size_t singular_values_used = 0;
  /// trace_norm / res_norm, the measured constant of the trace estimate.
  double trace_factor = 0.0;
  double norm_threshold = 0.0;
  int refinements = 0;
  std::vector<CandidateRecord> candidates;
};

struct UniformBoundsVerdict {
  bool passed = true;
  bool monotone = true;
  bool lower_bound = true;
  bool localization = true;
  bool rayleigh = true;
  bool step_budgets = true;
  bool norm_conditions = true;
  std::vector<bool> step_ok;
  /// Smallest slack over the steps (negative means violated).
  double worst_monotone_margin = 0.0;
  double worst_lower_margin = 0.0;
  double worst_localization_margin = 0.0;
  std::vector<std::string> warnings;
};

struct LimitEstimate {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double remaining_budget = 0.0;
};

struct ConstructionTrace {
  ConstructionConfig config;
  /// Resolved initial simplicity gap.
  double tau = 0.0;
  /// λ₁ on the initial grid h₀.
  double lambda1 = 0.0;
  std::vector<StepRecord> steps;
  std::optional<LimitEstimate> limit;
  std::optional<UniformBoundsVerdict> verdict;
  bool complete = false;

  /// Tower grown so far: a₁ plus every accepted step.
  TowerSpec tower() const;
};

/// Current end of the construction: Ω_n on grid h with its tracked pair.
struct ConstructionState {
  TowerSpec spec;
  Dyadic h;
  double lambda1 = 0.0;
  double lambda = 0.0;
  std::vector<double> psi;
  /// Tracking threshold of every accepted step.
  std::vector<double> taus;
};

/// A step failed; carries the partial trace including the failed step's candidates.
class ConstructionFailure : public NumericalError {
 public:
  ConstructionFailure(const std::string& what, ConstructionTrace partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const ConstructionTrace& partial() const { return partial_; }

 private:
  ConstructionTrace partial_;
};

/// No half-width in the scan range passes the simplicity tests.
class NoCandidateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Halvings of τ tried before a step gives up on finding a half-width.
inline constexpr int kMaxTauHalvings = 8;

ConstructionState initial_step(const ConstructionConfig& config);

/// Smallest a ∈ {a_n + scale + j·h} ∩ [a_n + scale, a_n + 2·scale] whose analytic
/// cube spectrum keeps distance >= tau from λ_n and for which the computed gap of
/// λ_n in Ω_n ∪ ω_{n+1} is at least tau/2 (reported through `gap`).
Dyadic choose_next_halfwidth(const ConstructionState& state, double tau, const EigenSolverOptions& solver = {},
                             double* gap = nullptr);

/// Analytic-only candidate test.
double analytic_distance(double lambda, double a);

/// Result of tracking the branch of λ_n into Ω_{n+1}.
struct TrackStep {
  double lambda = 0.0;
  std::vector<double> psi;
  double overlap = 0.0;
  std::vector<double> window_values;
};

/// Tracks (λ_n, ψ_n) from the truncation with spec.count() - 1 cubes into the
/// full tower `spec` (spec.count() cubes, count - 1 windows) on grid h.
TrackStep track_step(const TowerSpec& spec, const Dyadic& h, double lambda_n, const std::vector<double>& psi_n,
                     double tau, const EigenSolverOptions& solver);

/// Recomputes λ₁, ..., λ_n and ψ_n for an accepted tower on grid h; taus[k]
/// is the tracking threshold of step k + 1.
ConstructionState rebuild_state(const TowerSpec& spec, const Dyadic& h, const std::vector<double>& taus,
                                const EigenSolverOptions& solver);

/// Called with every accepted eigenfunction: step 0 is ψ₁ on the first cube.
using StepObserver = std::function<void(int step, const GridDomain& grid, const std::vector<double>& psi)>;

/// Halving search for the window δ_n; updates `state` on success.
StepRecord search_window(ConstructionState& state, const Dyadic& a_next, int n, double tau,
                         const ConstructionConfig& config, const StepObserver& observer = {});

ConstructionTrace run_construction(const ConstructionConfig& config, const StepObserver& observer = {});

UniformBoundsVerdict verify_uniform_bounds(const ConstructionTrace& trace);

LimitEstimate estimate_limit_eigenvalue(const ConstructionTrace& trace);

/// λ values of a replay.
struct ReplayResult {
  double lambda1 = 0.0;
  std::vector<double> lambda_ref;
  std::vector<double> lambda;
};

/// Recomputes every λ of a trace from its recorded (a, δ, h). With alpha != 1
/// the tower, the spacings and the tracking window are rescaled.
ReplayResult replay(const ConstructionTrace& trace, const Dyadic& alpha = Dyadic(1));

}  // namespace spectral_tower
