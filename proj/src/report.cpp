#include "spectral_tower/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "spectral_tower/errors.hpp"

namespace spectral_tower {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

namespace {

Dyadic dyadic_from(const Json& j) { return Dyadic::parse(j.get<std::string>()); }

}  // namespace

Json to_json(const ConstructionConfig& c) {
  Json j;
  j["epsilon"] = c.epsilon;
  j["cubes"] = c.cubes;
  j["a1"] = c.a1.str();
  j["tau"] = c.tau;
  j["ell"] = c.ell;
  j["h0"] = c.h0.str();
  j["delta_start"] = c.delta_start.str();
  j["max_refinements"] = c.max_refinements;
  j["norm_floor"] = c.norm_floor;
  j["seed"] = c.seed;
  j["eig_tol"] = c.eig_tol;
  return j;
}

ConstructionConfig config_from_json(const Json& j) {
  ConstructionConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.cubes = j.at("cubes").get<int>();
  c.a1 = dyadic_from(j.at("a1"));
  c.tau = j.at("tau").get<double>();
  c.ell = j.at("ell").get<int>();
  c.h0 = dyadic_from(j.at("h0"));
  c.delta_start = dyadic_from(j.at("delta_start"));
  c.max_refinements = j.at("max_refinements").get<int>();
  c.norm_floor = j.at("norm_floor").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.eig_tol = j.at("eig_tol").get<double>();
  return c;
}

Json to_json(const CandidateRecord& c) {
  Json j;
  j["delta"] = c.delta.str();
  j["h"] = c.h.str();
  j["lambda"] = number(c.lambda);
  j["d_lambda"] = number(c.d_lambda);
  j["d_psi"] = number(c.d_psi);
  j["res_norm"] = number(c.res_norm);
  j["trace_norm"] = number(c.trace_norm);
  j["accepted"] = c.accepted;
  j["reason"] = c.reason;
  return j;
}

Json to_json(const StepRecord& s) {
  Json j;
  j["n"] = s.n;
  j["a_next"] = s.a_next.str();
  j["eps_n"] = number(s.eps_n);
  j["delta"] = s.delta.str();
  j["h"] = s.h.str();
  j["lambda1"] = number(s.lambda1);
  j["lambda_ref"] = number(s.lambda_ref);
  j["lambda"] = number(s.lambda);
  j["overlap"] = number(s.overlap);
  j["d_lambda"] = number(s.d_lambda);
  j["d_psi"] = number(s.d_psi);
  j["loc1"] = number(s.loc1);
  j["loc_outside"] = number(s.loc_outside);
  j["form_value"] = number(s.form_value);
  j["tau"] = number(s.tau);
  j["gap"] = number(s.gap);
  j["res_norm"] = number(s.res_norm);
  j["trace_norm"] = number(s.trace_norm);
  j["trace_partial"] = number(s.trace_partial);
  j["trace_tail"] = number(s.trace_tail);
  j["singular_values_used"] = s.singular_values_used;
  j["trace_factor"] = number(s.trace_factor);
  j["norm_threshold"] = number(s.norm_threshold);
  j["refinements"] = s.refinements;
  j["candidates"] = Json::array();
  for (const auto& c : s.candidates) j["candidates"].push_back(to_json(c));
  return j;
}

namespace {

StepRecord step_from_json(const Json& j) {
  StepRecord s;
  s.n = j.at("n").get<int>();
  s.a_next = dyadic_from(j.at("a_next"));
  s.eps_n = number_from(j.at("eps_n"));
  s.delta = dyadic_from(j.at("delta"));
  s.h = dyadic_from(j.at("h"));
  s.lambda1 = number_from(j.at("lambda1"));
  s.lambda_ref = number_from(j.at("lambda_ref"));
  s.lambda = number_from(j.at("lambda"));
  s.overlap = number_from(j.at("overlap"));
  s.d_lambda = number_from(j.at("d_lambda"));
  s.d_psi = number_from(j.at("d_psi"));
  s.loc1 = number_from(j.at("loc1"));
  s.loc_outside = number_from(j.at("loc_outside"));
  s.form_value = number_from(j.at("form_value"));
  s.tau = number_from(j.at("tau"));
  s.gap = number_from(j.at("gap"));
  s.res_norm = number_from(j.at("res_norm"));
  s.trace_norm = number_from(j.at("trace_norm"));
  s.trace_partial = number_from(j.at("trace_partial"));
  s.trace_tail = number_from(j.at("trace_tail"));
  s.singular_values_used = j.at("singular_values_used").get<std::size_t>();
  s.trace_factor = number_from(j.at("trace_factor"));
  s.norm_threshold = number_from(j.at("norm_threshold"));
  s.refinements = j.at("refinements").get<int>();
  for (const auto& c : j.at("candidates")) {
    CandidateRecord r;
    r.delta = dyadic_from(c.at("delta"));
    r.h = dyadic_from(c.at("h"));
    r.lambda = number_from(c.at("lambda"));
    r.d_lambda = number_from(c.at("d_lambda"));
    r.d_psi = number_from(c.at("d_psi"));
    r.res_norm = number_from(c.at("res_norm"));
    r.trace_norm = number_from(c.at("trace_norm"));
    r.accepted = c.at("accepted").get<bool>();
    r.reason = c.at("reason").get<std::string>();
    s.candidates.push_back(r);
  }
  return s;
}

}  // namespace

Json to_json(const UniformBoundsVerdict& v) {
  Json j;
  j["passed"] = v.passed;
  j["monotone"] = v.monotone;
  j["lower_bound"] = v.lower_bound;
  j["localization"] = v.localization;
  j["rayleigh"] = v.rayleigh;
  j["step_budgets"] = v.step_budgets;
  j["norm_conditions"] = v.norm_conditions;
  j["step_ok"] = v.step_ok;
  j["worst_monotone_margin"] = number(v.worst_monotone_margin);
  j["worst_lower_margin"] = number(v.worst_lower_margin);
  j["worst_localization_margin"] = number(v.worst_localization_margin);
  j["warnings"] = v.warnings;
  return j;
}

Json to_json(const LimitEstimate& e) {
  return Json{{"value", number(e.value)},
              {"lower", number(e.lower)},
              {"upper", number(e.upper)},
              {"remaining_budget", number(e.remaining_budget)}};
}

Json to_json(const ConstructionTrace& t) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "construction_trace";
  j["config"] = to_json(t.config);
  j["tau"] = number(t.tau);
  j["lambda1"] = number(t.lambda1);
  j["complete"] = t.complete;
  j["steps"] = Json::array();
  for (const auto& s : t.steps) j["steps"].push_back(to_json(s));
  j["limit"] = t.limit ? to_json(*t.limit) : Json(nullptr);
  j["verdict"] = t.verdict ? to_json(*t.verdict) : Json(nullptr);
  return j;
}

ConstructionTrace trace_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw ValidationError("unsupported trace schema_version " + j.at("schema_version").dump());
    ConstructionTrace t;
    t.config = config_from_json(j.at("config"));
    t.tau = number_from(j.at("tau"));
    t.lambda1 = number_from(j.at("lambda1"));
    t.complete = j.at("complete").get<bool>();
    for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
    if (!t.complete && !t.steps.empty() && !t.steps.back().candidates.empty() &&
        !t.steps.back().candidates.back().accepted)
      t.steps.pop_back();  // failed step: nothing accepted to replay
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed trace: ") + e.what());
  }
}

Json to_json(const ResidualScan& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "quasimode_scan";
  j["lambda"] = number(s.lambda);
  j["rows"] = Json::array();
  for (const auto& r : s.rows)
    j["rows"].push_back(Json{{"truncation", r.truncation},
                             {"R", number(r.R)},
                             {"h", r.h.str()},
                             {"nodes", r.nodes},
                             {"residual", number(r.residual)}});
  j["slope"] = s.slope ? Json(*s.slope) : Json(nullptr);
  j["warnings"] = s.warnings;
  return j;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace spectral_tower
