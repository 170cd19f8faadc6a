#include "spectral_tower/construction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace spectral_tower {

namespace {

constexpr double kSlack = 1e-10;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

TowerSpec extend(const TowerSpec& spec, const Dyadic& a, const std::optional<Dyadic>& window) {
  auto hw = spec.halfwidths();
  hw.push_back(a);
  auto w = spec.windows();
  if (window) w.push_back(*window);
  return TowerSpec(std::move(hw), std::move(w), spec.scale(), spec.dim());
}

double grid_distance(const GridDomain& g, const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += (u[k] - v[k]) * (u[k] - v[k]);
  return std::sqrt(g.cell_volume() * s);
}

// Shift used when probing the spectrum around an eigenvalue of the operator
// itself, so the factorization stays away from an exact singularity.
double probe_shift(double lambda, double tau) { return lambda - 0.1 * std::max(tau, 1e-2 * lambda); }

}  // namespace

void ConstructionConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1), got " + fmt(epsilon));
  if (cubes < 2) throw ValidationError("cubes must be >= 2, got " + std::to_string(cubes));
  if (!a1.is_positive()) throw ValidationError("a1 must be positive");
  if (tau < 0.0 || !std::isfinite(tau)) throw ValidationError("tau must be positive");
  if (ell < 1) throw ValidationError("ell must be >= 1");
  if (!h0.is_positive()) throw ValidationError("h0 must be positive");
  if (!delta_start.is_positive()) throw ValidationError("delta_start must be positive");
  if (delta_start > a1) throw ValidationError("delta_start must not exceed a1");
  if (!a1.is_multiple_of(h0)) throw ValidationError("grid alignment failure: a1 = " + a1.str() + " is not a multiple of h0 = " + h0.str());
  if (max_refinements < 0) throw ValidationError("max_refinements must be >= 0");
  if (norm_floor < 0.0) throw ValidationError("norm_floor must be >= 0");
  if (!(eig_tol > 0.0)) throw ValidationError("eig_tol must be positive");
}

EigenSolverOptions ConstructionConfig::solver() const {
  EigenSolverOptions o;
  o.tol = eig_tol;
  o.seed = seed;
  return o;
}

ConstructionConfig construction_config_from_keyvalues(const KeyValues& kv) {
  kv.require_known({"epsilon", "cubes", "a1", "tau", "ell", "h0", "delta_start", "max_refinements", "norm_floor",
                    "seed", "eig_tol"});
  ConstructionConfig c;
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  c.cubes = static_cast<int>(kv.get_int("cubes", c.cubes));
  c.a1 = kv.get_dyadic("a1", c.a1);
  if (kv.has("tau")) {
    c.tau = kv.get_double("tau");
    if (!(c.tau > 0.0)) throw ValidationError("tau must be positive");
  }
  c.ell = static_cast<int>(kv.get_int("ell", c.ell));
  c.h0 = kv.get_dyadic("h0", c.h0);
  c.delta_start = kv.get_dyadic("delta_start", c.delta_start);
  c.max_refinements = static_cast<int>(kv.get_int("max_refinements", c.max_refinements));
  c.norm_floor = kv.get_double("norm_floor", c.norm_floor);
  if (kv.has("seed")) {
    const auto s = kv.get_int("seed");
    if (s < 0) throw ValidationError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  c.eig_tol = kv.get_double("eig_tol", c.eig_tol);
  c.validate();
  return c;
}

TowerSpec ConstructionTrace::tower() const {
  std::vector<Dyadic> a{config.a1};
  std::vector<Dyadic> d;
  for (const auto& s : steps) {
    a.push_back(s.a_next);
    d.push_back(s.delta);
  }
  return TowerSpec(std::move(a), std::move(d));
}

ConstructionState initial_step(const ConstructionConfig& config) {
  config.validate();
  TowerSpec spec({config.a1}, {});
  const auto disc = assemble(spec, 1, 0, config.h0);
  auto pairs = lowest_eigenpairs(disc.op, 1, config.solver());
  return {spec, config.h0, pairs[0].value, pairs[0].value, std::move(pairs[0].vector), {}};
}

double analytic_distance(double lambda, double a) {
  const double unit = std::numbers::pi * std::numbers::pi / (4.0 * a * a);
  double best = std::numeric_limits<double>::infinity();
  // k² + l² ranges over sums of two positive squares up to just past λ/unit.
  const auto kmax = static_cast<int>(std::sqrt(lambda / unit)) + 2;
  for (int k = 1; k <= kmax; ++k)
    for (int l = 1; l <= kmax; ++l) best = std::min(best, std::abs(lambda - unit * (k * k + l * l)));
  return best;
}

Dyadic choose_next_halfwidth(const ConstructionState& state, double tau, const EigenSolverOptions& solver,
                             double* gap) {
  if (tau < 0.0) throw ValidationError("tau must be >= 0");
  const Dyadic& an = state.spec.halfwidths().back();
  const Dyadic& unit = state.spec.scale();
  const std::size_t n = state.spec.count();
  for (Dyadic a = an + unit; a <= an + unit * 2; a = a + state.h) {
    if (analytic_distance(state.lambda, a.to_double()) < tau) continue;
    const TowerSpec candidate = extend(state.spec, a, std::nullopt);
    const auto disc = assemble(candidate, n + 1, n - 1, state.h);
    const auto pairs = eigenpairs_near(disc.op, probe_shift(state.lambda, tau), 8, solver);
    const double g = simplicity_gap(pairs, state.lambda);
    if (g < 0.5 * tau) continue;
    if (gap) *gap = g;
    return a;
  }
  throw NoCandidateError("no admissible half-width in [" + (an + unit).str() + ", " + (an + unit * 2).str() +
                       "] for lambda = " + fmt(state.lambda) + " and tau = " + fmt(tau) +
                       "; widen the scan range or refine the scan step");
}

namespace {

struct TrackDetail {
  TrackStep step;
  std::vector<double> reference;
  std::shared_ptr<Discretization> big;
};

TrackDetail track_detail(const TowerSpec& spec, const Dyadic& h, double lambda_n, const std::vector<double>& psi_n,
                         double tau, const EigenSolverOptions& solver) {
  if (!(tau > 0.0)) throw ValidationError("tracking needs a positive tau");
  const std::size_t n1 = spec.count();
  if (n1 < 2) throw ValidationError("tracking needs at least two cubes");
  TrackDetail out;
  out.big = std::make_shared<Discretization>(assemble(spec, n1, n1 - 1, h));
  const auto small = assemble(spec, n1 - 1, n1 - 2, h);
  out.reference = Embedding(small.grid, out.big->grid).embed(psi_n);
  TrackingOptions options;
  options.solver = solver;
  const auto tracked = track_eigenpair(out.big->op, out.reference, lambda_n - 0.5 * tau, lambda_n + 0.25 * tau, options);
  out.step.lambda = tracked.pair.value;
  out.step.psi = tracked.pair.vector;
  out.step.overlap = tracked.overlap;
  out.step.window_values = tracked.window_values;
  return out;
}

}  // namespace

TrackStep track_step(const TowerSpec& spec, const Dyadic& h, double lambda_n, const std::vector<double>& psi_n,
                     double tau, const EigenSolverOptions& solver) {
  return track_detail(spec, h, lambda_n, psi_n, tau, solver).step;
}

ConstructionState rebuild_state(const TowerSpec& spec, const Dyadic& h, const std::vector<double>& taus,
                                const EigenSolverOptions& solver) {
  if (taus.size() + 1 < spec.count()) throw ValidationError("rebuild_state: missing tracking thresholds");
  const TowerSpec first = truncate(spec, 1);
  const auto disc = assemble(first, 1, 0, h);
  auto pairs = lowest_eigenpairs(disc.op, 1, solver);
  ConstructionState state{first, h, pairs[0].value, pairs[0].value, std::move(pairs[0].vector), {}};
  for (std::size_t k = 2; k <= spec.count(); ++k) {
    const TowerSpec next = truncate(spec, k);
    const double tau = taus[k - 2];
    auto ts = track_step(next, h, state.lambda, state.psi, tau, solver);
    state.taus.push_back(tau);
    state.spec = next;
    state.lambda = ts.lambda;
    state.psi = std::move(ts.psi);
  }
  return state;
}

StepRecord search_window(ConstructionState& state, const Dyadic& a_next, int n, double tau,
                         const ConstructionConfig& config, const StepObserver& observer) {
  const auto solver = config.solver();
  StepRecord rec;
  rec.n = n;
  rec.a_next = a_next;
  rec.eps_n = std::ldexp(config.epsilon, -n);
  rec.norm_threshold = std::max(std::ldexp(1.0, -n), config.norm_floor);

  auto fail = [&](StepRecord& r, int refinements, const Dyadic& d, const Dyadic& h, const std::string& reason) {
    r.refinements = refinements;
    r.tau = tau;
    ConstructionTrace partial;
    partial.config = config;
    partial.tau = tau;
    partial.steps.push_back(r);
    throw ConstructionFailure("step " + std::to_string(n) + ": no window accepted after " +
                                  std::to_string(refinements) + " refinements (last: delta = " + d.str() +
                                  ", h = " + h.str() + ", " + reason + ")",
                              std::move(partial));
  };

  Dyadic delta = min(config.delta_start, config.a1);
  delta = min(delta, min(state.spec.halfwidths().back(), a_next));
  for (int refinements = 0;; ++refinements) {
    while (!delta.is_multiple_of(state.h)) state = rebuild_state(state.spec, state.h.half(), state.taus, solver);

    const TowerSpec candidate = extend(state.spec, a_next, delta);
    CandidateRecord c;
    c.delta = delta;
    c.h = state.h;
    std::optional<TrackDetail> tracked;
    try {
      tracked = track_detail(candidate, state.h, state.lambda, state.psi, tau, solver);
    } catch (const EmptyWindowError&) {
      // The branch dropped below λ_n - τ/2, far beyond the budget ε_n.
      c.lambda = c.d_lambda = c.d_psi = c.res_norm = c.trace_norm = std::numeric_limits<double>::quiet_NaN();
      c.reason = "no eigenvalue in the tracking window";
    }
    if (!tracked) {
      rec.candidates.push_back(c);
      if (refinements >= config.max_refinements) fail(rec, refinements, delta, state.h, c.reason);
      delta = delta.half();
      continue;
    }
    const auto& detail = *tracked;
    const auto& grid = detail.big->grid;

    c.lambda = detail.step.lambda;
    c.d_lambda = state.lambda - detail.step.lambda;
    c.d_psi = grid_distance(grid, detail.step.psi, detail.reference);
    c.res_norm = std::numeric_limits<double>::quiet_NaN();
    c.trace_norm = std::numeric_limits<double>::quiet_NaN();

    TraceNormEstimate tn;
    if (c.d_lambda < -kSlack * state.lambda) {
      c.reason = "eigenvalue increased";
    } else if (c.d_lambda > rec.eps_n) {
      c.reason = "eigenvalue shift above budget";
    } else if (c.d_psi > rec.eps_n) {
      c.reason = "eigenfunction shift above budget";
    } else {
      const auto small = assemble(candidate, state.spec.count() + 1, state.spec.count() - 1, state.h);
      const auto diff = resolvent_difference(*detail.big, small, 1);
      NormOptions no;
      no.seed = config.seed;
      c.res_norm = operator_norm(diff, no);
      const std::size_t face = window_face_nodes(grid, state.spec.count() - 1);
      const std::size_t k = std::min(grid.size(), static_cast<std::size_t>(config.ell) * face + 4);
      tn = power_difference_trace_norm(diff, config.ell, k, no);
      c.trace_norm = tn.total();
      if (c.res_norm > rec.norm_threshold)
        c.reason = "resolvent difference norm above threshold";
      else if (c.trace_norm > rec.norm_threshold)
        c.reason = "trace norm above threshold";
      else
        c.accepted = true;
    }
    rec.candidates.push_back(c);

    if (c.accepted) {
      rec.delta = delta;
      rec.h = state.h;
      rec.lambda1 = state.lambda1;
      rec.lambda_ref = state.lambda;
      rec.lambda = c.lambda;
      rec.overlap = detail.step.overlap;
      rec.d_lambda = c.d_lambda;
      rec.d_psi = c.d_psi;
      rec.loc1 = region_mass(grid, detail.step.psi, Region::cube(0));
      rec.loc_outside = region_mass(grid, detail.step.psi, Region::cube(0).outside());
      const auto apsi = detail.big->op.apply(detail.step.psi);
      rec.form_value = l2_inner(grid, apsi, detail.step.psi);
      rec.res_norm = c.res_norm;
      rec.trace_norm = c.trace_norm;
      rec.trace_partial = tn.partial;
      rec.trace_tail = tn.tail;
      rec.singular_values_used = tn.spectrum.k;
      rec.trace_factor = c.res_norm > 0.0 ? c.trace_norm / c.res_norm : 0.0;
      rec.refinements = refinements;
      rec.tau = tau;
      if (observer) observer(n, grid, detail.step.psi);
      state.spec = candidate;
      state.lambda = detail.step.lambda;
      state.psi = detail.step.psi;
      state.taus.push_back(tau);
      return rec;
    }
    if (refinements >= config.max_refinements) fail(rec, refinements, delta, state.h, c.reason);
    delta = delta.half();
  }
}

ConstructionTrace run_construction(const ConstructionConfig& config, const StepObserver& observer) {
  config.validate();
  ConstructionTrace trace;
  trace.config = config;
  ConstructionState state = initial_step(config);
  if (observer) observer(0, assemble(state.spec, 1, 0, state.h).grid, state.psi);
  trace.lambda1 = state.lambda1;
  trace.tau = config.tau > 0.0 ? config.tau : 0.05 * state.lambda1;

  double tau = trace.tau;
  for (int n = 1; n < config.cubes; ++n) {
    try {
      double gap = 0.0;
      std::optional<Dyadic> a;
      for (int halvings = 0; !a; ++halvings) {
        try {
          a = choose_next_halfwidth(state, tau, config.solver(), &gap);
        } catch (const NoCandidateError&) {
          if (halvings >= kMaxTauHalvings) throw;
          tau *= 0.5;
        }
      }
      StepRecord rec = search_window(state, *a, n, tau, config, observer);
      rec.gap = gap;
      trace.steps.push_back(std::move(rec));
    } catch (const ConstructionFailure& e) {
      ConstructionTrace partial = trace;
      for (const auto& s : e.partial().steps) partial.steps.push_back(s);
      throw ConstructionFailure(e.what(), std::move(partial));
    } catch (const NumericalError& e) {
      throw ConstructionFailure("step " + std::to_string(n) + ": " + e.what(), trace);
    }
  }
  trace.complete = true;
  trace.limit = estimate_limit_eigenvalue(trace);
  trace.verdict = verify_uniform_bounds(trace);
  return trace;
}

UniformBoundsVerdict verify_uniform_bounds(const ConstructionTrace& trace) {
  UniformBoundsVerdict v;
  if (trace.steps.empty()) {
    v.warnings.push_back("empty trace: bounds hold vacuously");
    return v;
  }
  const double eps = trace.config.epsilon;
  v.worst_monotone_margin = v.worst_lower_margin = v.worst_localization_margin =
      std::numeric_limits<double>::infinity();
  double budget = 0.0;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    const double slack = kSlack * std::abs(s.lambda1);
    budget += s.eps_n;

    double mono = s.lambda_ref - s.lambda;
    if (i > 0 && trace.steps[i - 1].h == s.h) mono = std::min(mono, trace.steps[i - 1].lambda - s.lambda);
    const double lower = s.lambda - (s.lambda1 - eps);
    const double loc = s.loc1 - (1.0 - eps);
    v.worst_monotone_margin = std::min(v.worst_monotone_margin, mono);
    v.worst_lower_margin = std::min(v.worst_lower_margin, lower);
    v.worst_localization_margin = std::min(v.worst_localization_margin, loc);

    const bool ok_mono = mono >= -slack;
    const bool ok_lower = lower >= -slack && s.lambda <= s.lambda1 + slack;
    const bool ok_loc = loc >= 0.0 && s.loc_outside <= budget + kSlack;
    const bool ok_rayleigh = s.form_value <= s.lambda * (1.0 + 1e-9) && s.lambda <= s.lambda1 + slack;
    const bool ok_budget = s.d_lambda >= -slack && s.d_lambda <= s.eps_n && s.d_psi <= s.eps_n;
    const bool ok_norms = s.res_norm <= s.norm_threshold && s.trace_norm <= s.norm_threshold;

    v.monotone = v.monotone && ok_mono;
    v.lower_bound = v.lower_bound && ok_lower;
    v.localization = v.localization && ok_loc;
    v.rayleigh = v.rayleigh && ok_rayleigh;
    v.step_budgets = v.step_budgets && ok_budget;
    v.norm_conditions = v.norm_conditions && ok_norms;
    v.step_ok.push_back(ok_mono && ok_lower && ok_loc && ok_rayleigh && ok_budget && ok_norms);
    if (i > 0 && trace.steps[i - 1].h != s.h)
      v.warnings.push_back("step " + std::to_string(s.n) + " ran on a refined grid h = " + s.h.str() +
                           "; monotonicity is checked against lambda_ref on that grid");
  }
  v.passed = v.monotone && v.lower_bound && v.localization && v.rayleigh && v.step_budgets && v.norm_conditions;
  return v;
}

LimitEstimate estimate_limit_eigenvalue(const ConstructionTrace& trace) {
  if (trace.steps.empty()) throw ValidationError("limit estimate needs at least one construction step");
  const auto& last = trace.steps.back();
  LimitEstimate e;
  e.value = last.lambda;
  e.upper = last.lambda;
  // Later steps may lower λ by at most Σ_{k > n} ε_k = 2^{-n} ε.
  e.remaining_budget = std::ldexp(trace.config.epsilon, -last.n);
  e.lower = std::max(last.lambda - e.remaining_budget, last.lambda1 - trace.config.epsilon);
  return e;
}

ReplayResult replay(const ConstructionTrace& trace, const Dyadic& alpha) {
  if (!alpha.is_positive()) throw ValidationError("rescaling factor must be positive");
  const double a = alpha.to_double();
  const auto solver = trace.config.solver();
  const TowerSpec spec = alpha == Dyadic(1) ? trace.tower() : rescale(trace.tower(), alpha);
  std::vector<double> taus;
  for (const auto& s : trace.steps) taus.push_back(s.tau / (a * a));

  ReplayResult out;
  out.lambda1 = rebuild_state(truncate(spec, 1), trace.config.h0 * alpha, {}, solver).lambda;
  std::optional<ConstructionState> state;
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const Dyadic h = trace.steps[k].h * alpha;
    if (!state || state->h != h) state = rebuild_state(truncate(spec, k + 1), h, taus, solver);
    out.lambda_ref.push_back(state->lambda);
    const TowerSpec next = truncate(spec, k + 2);
    auto ts = track_step(next, h, state->lambda, state->psi, taus[k], solver);
    out.lambda.push_back(ts.lambda);
    state->spec = next;
    state->lambda = ts.lambda;
    state->psi = std::move(ts.psi);
  }
  return out;
}

}  // namespace spectral_tower
