#include "spectral_tower/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "spectral_tower/config.hpp"
#include "spectral_tower/construction.hpp"
#include "spectral_tower/discretize.hpp"
#include "spectral_tower/errors.hpp"
#include "spectral_tower/geometry.hpp"
#include "spectral_tower/kernels.hpp"
#include "spectral_tower/quasimode.hpp"
#include "spectral_tower/report.hpp"
#include "spectral_tower/spectral.hpp"

namespace spectral_tower {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr double kReplayTolerance = 1e-10;

const std::vector<std::string> kTowerKeys = {"dim", "base_unit", "halfwidths", "windows", "scale"};

struct Flags {
  std::string config;
  std::string out;
  std::string seed;
  std::string h;
  double lambda = 0.0;
  int ell = 0;
  std::string replay;
  bool verify = false;
  bool analytic_check = false;
  bool dense_oracle = false;
  bool dump_fields = false;

  CLI::Option* lambda_opt = nullptr;
  CLI::Option* ell_opt = nullptr;
};

std::vector<std::string> with_tower_keys(std::vector<std::string> keys) {
  keys.insert(keys.end(), kTowerKeys.begin(), kTowerKeys.end());
  return keys;
}

std::uint64_t parse_seed(const std::string& text) {
  const auto v = parse_integer(text, "seed");
  if (v < 0) throw ValidationError("seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%dT%H%M%S");
  return s.str();
}

// Output directory, artifact list and the run manifest.
class Run {
 public:
  Run(std::string command, const Flags& flags, const KeyValues& config)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    dir_ = flags.out.empty() ? fs::path("runs") / (command_ + "-" + timestamp() + "-" + std::to_string(::getpid()))
                             : fs::path(flags.out);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir_.string() + ": " + ec.message());
    manifest_["schema_version"] = kSchemaVersion;
    manifest_["command"] = command_;
    manifest_["tool_version"] = kToolVersion;
    Json snapshot = Json::object();
    for (const auto& [k, v] : config.entries()) snapshot[k] = v;
    manifest_["config"] = snapshot;
    manifest_["config_path"] = flags.config;
    Json overrides = Json::object();
    if (!flags.seed.empty()) overrides["seed"] = flags.seed;
    if (!flags.h.empty()) overrides["h"] = flags.h;
    if (flags.lambda_opt && flags.lambda_opt->count()) overrides["lambda"] = flags.lambda;
    if (flags.ell_opt && flags.ell_opt->count()) overrides["ell"] = flags.ell;
    if (!flags.replay.empty()) overrides["replay"] = flags.replay;
    manifest_["overrides"] = overrides;
    manifest_["threads"] = kernels::max_threads();
  }

  const fs::path& dir() const { return dir_; }

  fs::path artifact(const std::string& name) {
    const fs::path p = dir_ / name;
    if (fs::path(name).has_parent_path()) fs::create_directories(p.parent_path());
    artifacts_.push_back(p.string());
    return p;
  }

  void set_seed(std::uint64_t seed) { manifest_["seed"] = seed; }

  void finish(int status, const std::string& error) {
    manifest_["artifacts"] = artifacts_;
    manifest_["exit_status"] = status;
    if (!error.empty()) manifest_["error"] = error;
    manifest_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_["started_at"] = timestamp_;
    write_json(dir_ / "manifest.json", manifest_);
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::string timestamp_ = timestamp();
  fs::path dir_;
  Json manifest_;
  std::vector<std::string> artifacts_;
};

Json tower_json(const TowerSpec& spec) {
  Json j;
  Json a = Json::array(), d = Json::array();
  for (const auto& v : spec.halfwidths()) a.push_back(v.str());
  for (const auto& v : spec.windows()) d.push_back(v.str());
  j["halfwidths"] = a;
  j["windows"] = d;
  j["scale"] = spec.scale().str();
  return j;
}

Dyadic spacing(const Flags& flags, const KeyValues& kv, std::optional<Dyadic> fallback = std::nullopt) {
  if (!flags.h.empty()) return Dyadic::parse(flags.h);
  if (kv.has("h")) return kv.get_dyadic("h");
  if (fallback) return *fallback;
  throw ValidationError("grid spacing h is required (config key h or --h)");
}

struct Analytic {
  double continuum;
  double discrete;
};

// Dirichlet eigenvalues of a union of disjoint cubes, continuum and five-point.
std::vector<Analytic> analytic_cube_spectrum(const TowerSpec& spec, std::size_t cubes, const Dyadic& h,
                                             std::size_t count) {
  std::vector<Analytic> all;
  const double hv = h.to_double();
  for (std::size_t c = 0; c < cubes; ++c) {
    const double a = spec.halfwidth(c).to_double();
    const auto intervals = static_cast<std::int64_t>(spec.halfwidth(c).divide_exact(h) * 2);
    const auto pmax = std::min<std::int64_t>(intervals - 1, static_cast<std::int64_t>(count) + 2);
    for (std::int64_t p = 1; p <= pmax; ++p)
      for (std::int64_t q = 1; q <= pmax; ++q) {
        const double sp = std::sin(p * std::numbers::pi / (2.0 * intervals));
        const double sq = std::sin(q * std::numbers::pi / (2.0 * intervals));
        all.push_back({std::numbers::pi * std::numbers::pi / (4 * a * a) * static_cast<double>(p * p + q * q),
                       4.0 / (hv * hv) * (sp * sp + sq * sq)});
      }
  }
  std::sort(all.begin(), all.end(), [](const Analytic& x, const Analytic& y) { return x.discrete < y.discrete; });
  if (all.size() > count) all.resize(count);
  return all;
}

int cmd_spectrum(const Flags& flags, const KeyValues& kv, Run& run, std::ostream& out) {
  kv.require_known(with_tower_keys({"cubes", "open_windows", "h", "modes", "seed"}));
  const TowerSpec spec = tower_from_keyvalues(kv);
  const auto cubes = static_cast<std::size_t>(kv.get_int("cubes", static_cast<std::int64_t>(spec.count())));
  const auto default_open = std::min(cubes - 1, spec.window_count());
  const auto open = static_cast<std::size_t>(kv.get_int("open_windows", static_cast<std::int64_t>(default_open)));
  const Dyadic h = spacing(flags, kv);
  const auto modes = kv.get_int("modes", 6);
  if (modes < 1) throw ValidationError("modes must be >= 1");
  EigenSolverOptions solver;
  solver.seed = flags.seed.empty() ? (kv.has("seed") ? parse_seed(kv.get_string("seed")) : solver.seed)
                                   : parse_seed(flags.seed);
  run.set_seed(solver.seed);

  const auto disc = assemble(spec, cubes, open, h);
  const auto pairs = lowest_eigenpairs(disc.op, static_cast<int>(modes), solver);

  Json report;
  report["schema_version"] = kSchemaVersion;
  report["kind"] = "spectrum";
  report["tower"] = tower_json(truncate(spec, cubes));
  report["cubes"] = cubes;
  report["open_windows"] = open;
  report["h"] = h.str();
  report["nodes"] = disc.grid.size();
  report["components"] = components(disc.grid);
  Json values = Json::array(), residuals = Json::array();
  for (const auto& p : pairs) {
    values.push_back(p.value);
    residuals.push_back(p.residual);
  }
  report["eigenvalues"] = values;
  report["residuals"] = residuals;

  if (flags.analytic_check) {
    if (open != 0) throw ValidationError("--analytic-check needs a union of closed cubes (open_windows = 0)");
    const auto exact = analytic_cube_spectrum(spec, cubes, h, pairs.size());
    Json rows = Json::array();
    double worst_rel = 0.0, worst_discrete = 0.0;
    for (std::size_t k = 0; k < pairs.size() && k < exact.size(); ++k) {
      const double rel = std::abs(pairs[k].value - exact[k].continuum) / exact[k].continuum;
      const double dis = std::abs(pairs[k].value - exact[k].discrete);
      worst_rel = std::max(worst_rel, rel);
      worst_discrete = std::max(worst_discrete, dis);
      rows.push_back(Json{{"computed", pairs[k].value},
                          {"continuum", exact[k].continuum},
                          {"discrete", exact[k].discrete},
                          {"relative_error", rel}});
    }
    report["analytic_check"] = Json{{"modes", rows},
                                    {"max_relative_error_continuum", worst_rel},
                                    {"max_abs_error_discrete", worst_discrete}};
    out << "analytic check: max relative error " << worst_rel << "\n";
  }

  if (flags.dense_oracle) {
    if (disc.grid.size() > 2500) throw ValidationError("--dense-oracle is limited to 2500 unknowns");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(disc.op.to_dense(), Eigen::EigenvaluesOnly);
    double worst = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k)
      worst = std::max(worst, std::abs(pairs[k].value - eig.eigenvalues()(static_cast<Eigen::Index>(k))));
    report["dense_oracle"] = Json{{"max_abs_discrepancy", worst}};
    out << "dense oracle: max discrepancy " << worst << "\n";
  }

  if (flags.dump_fields)
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      std::ofstream f(run.artifact("fields/mode_" + std::to_string(k + 1) + ".txt"));
      write_field(f, disc.grid, pairs[k].vector);
    }

  write_json(run.artifact("spectrum.json"), report);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    out << "lambda_" << k + 1 << " = " << std::setprecision(15) << pairs[k].value << "\n";
  return kExitOk;
}

int cmd_replay(const Flags& flags, Run& run, std::ostream& out) {
  const ConstructionTrace trace = trace_from_json(read_json(flags.replay));
  run.set_seed(trace.config.seed);
  const ReplayResult r = replay(trace);
  double worst = std::abs(r.lambda1 - trace.lambda1);
  Json recorded = Json::array(), replayed = Json::array();
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    worst = std::max(worst, std::abs(r.lambda[k] - trace.steps[k].lambda));
    worst = std::max(worst, std::abs(r.lambda_ref[k] - trace.steps[k].lambda_ref));
    recorded.push_back(trace.steps[k].lambda);
    replayed.push_back(r.lambda[k]);
  }
  const bool passed = worst <= kReplayTolerance;
  Json report{{"schema_version", kSchemaVersion},
              {"kind", "replay"},
              {"source", flags.replay},
              {"lambda1_recorded", trace.lambda1},
              {"lambda1_replayed", r.lambda1},
              {"recorded", recorded},
              {"replayed", replayed},
              {"max_abs_deviation", worst},
              {"tolerance", kReplayTolerance},
              {"passed", passed}};
  write_json(run.artifact("replay.json"), report);
  out << "replay: max deviation " << worst << (passed ? " (ok)" : " (FAILED)") << "\n";
  if (!passed) throw NumericalError("replay deviates from the recorded trace by " + std::to_string(worst));
  return kExitOk;
}

int cmd_construct(const Flags& flags, const KeyValues& kv, Run& run, std::ostream& out) {
  if (!flags.replay.empty()) return cmd_replay(flags, run, out);
  ConstructionConfig config = construction_config_from_keyvalues(kv);
  if (!flags.seed.empty()) config.seed = parse_seed(flags.seed);
  if (!flags.h.empty()) config.h0 = Dyadic::parse(flags.h);
  if (flags.ell_opt && flags.ell_opt->count()) config.ell = flags.ell;
  config.validate();
  run.set_seed(config.seed);

  StepObserver observer;
  if (flags.dump_fields)
    observer = [&run](int step, const GridDomain& grid, const std::vector<double>& psi) {
      std::ofstream f(run.artifact("fields/psi_" + std::to_string(step + 1) + ".txt"));
      write_field(f, grid, psi);
    };

  ConstructionTrace trace;
  try {
    trace = run_construction(config, observer);
  } catch (const ConstructionFailure& e) {
    write_json(run.artifact("trace.json"), to_json(e.partial()));
    throw;
  }
  write_json(run.artifact("trace.json"), to_json(trace));
  out << "lambda_1 = " << std::setprecision(15) << trace.lambda1 << "\n";
  for (const auto& s : trace.steps)
    out << "step " << s.n << ": a = " << s.a_next.str() << ", delta = " << s.delta.str() << ", h = " << s.h.str()
        << ", lambda = " << s.lambda << "\n";
  if (trace.limit)
    out << "lambda_inf in [" << trace.limit->lower << ", " << trace.limit->upper << "]\n";
  if (flags.verify && !trace.verdict->passed) throw NumericalError("uniform bound verification failed");
  return kExitOk;
}

int cmd_resolvent(const Flags& flags, const KeyValues& kv, Run& run, std::ostream& out) {
  kv.require_known(with_tower_keys({"cubes", "big_open_windows", "small_open_windows", "h", "ell", "k", "probes", "seed"}));
  const TowerSpec spec = tower_from_keyvalues(kv);
  const auto cubes = static_cast<std::size_t>(kv.get_int("cubes", static_cast<std::int64_t>(spec.count())));
  const auto big_open = static_cast<std::size_t>(
      kv.get_int("big_open_windows", static_cast<std::int64_t>(std::min(cubes - 1, spec.window_count()))));
  const auto small_open = static_cast<std::size_t>(kv.get_int("small_open_windows", 0));
  const Dyadic h = spacing(flags, kv);
  const int ell = flags.ell_opt && flags.ell_opt->count() ? flags.ell : static_cast<int>(kv.get_int("ell", 2));
  if (ell < 1) throw ValidationError("ell must be >= 1");
  const auto probes = kv.get_int("probes", 10);
  if (probes < 1) throw ValidationError("probes must be >= 1");
  NormOptions no;
  no.seed = flags.seed.empty() ? (kv.has("seed") ? parse_seed(kv.get_string("seed")) : no.seed) : parse_seed(flags.seed);
  run.set_seed(no.seed);

  const auto big = assemble(spec, cubes, big_open, h);
  const auto small = assemble(spec, cubes, small_open, h);
  const auto diff = resolvent_difference(big, small, 1);
  const std::size_t n = big.grid.size();

  std::size_t face = 0;
  for (std::size_t w = small_open; w < big_open; ++w) face += window_face_nodes(big.grid, w);
  const std::size_t k = kv.has("k") ? static_cast<std::size_t>(kv.get_int("k"))
                                    : std::min(n, static_cast<std::size_t>(ell) * face + 4);
  const double op = operator_norm(diff, no);
  const auto tn = power_difference_trace_norm(diff, ell, k, no);
  const double tele = telescoping_residual(diff, ell, static_cast<int>(probes), no.seed);

  Json report;
  report["schema_version"] = kSchemaVersion;
  report["kind"] = "resolvent_difference";
  report["tower"] = tower_json(truncate(spec, cubes));
  report["h"] = h.str();
  report["big_open_windows"] = big_open;
  report["small_open_windows"] = small_open;
  report["nodes"] = n;
  report["window_face_nodes"] = face;
  report["ell"] = ell;
  report["op_norm"] = op;
  report["singular_values"] = tn.spectrum.values;
  report["k"] = k;
  report["trace_norm_partial"] = tn.partial;
  report["trace_norm_tail"] = tn.tail;
  report["trace_norm"] = tn.total();
  report["telescoping_residual"] = tele;
  report["probes"] = probes;

  if (flags.dense_oracle) {
    if (n > 2500) throw ValidationError("--dense-oracle is limited to 2500 unknowns");
    const Eigen::MatrixXd id_big = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd rb = (big.op.to_dense() + id_big).inverse();
    const auto ns = static_cast<Eigen::Index>(small.grid.size());
    const Eigen::MatrixXd rs = (small.op.to_dense() + Eigen::MatrixXd::Identity(ns, ns)).inverse();
    Eigen::MatrixXd rb_pow = id_big, rs_pow = Eigen::MatrixXd::Identity(ns, ns);
    for (int p = 0; p < ell; ++p) {
      rb_pow = rb_pow * rb;
      rs_pow = rs_pow * rs;
    }
    const Embedding emb(small.grid, big.grid);
    Eigen::MatrixXd d = rb_pow;
    for (Eigen::Index i = 0; i < ns; ++i)
      for (Eigen::Index j = 0; j < ns; ++j)
        d(static_cast<Eigen::Index>(emb.map()[i]), static_cast<Eigen::Index>(emb.map()[j])) -= rs_pow(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly);
    std::vector<double> s(eig.eigenvalues().data(), eig.eigenvalues().data() + eig.eigenvalues().size());
    for (auto& v : s) v = std::abs(v);
    std::sort(s.begin(), s.end(), std::greater<>());
    double partial = 0.0, total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      total += s[i];
      if (i < k) partial += s[i];
    }
    report["dense_oracle"] = Json{{"partial", partial},
                                  {"total", total},
                                  {"partial_discrepancy", std::abs(partial - tn.partial)},
                                  {"total_discrepancy", std::abs(total - tn.total())}};
    out << "dense oracle: partial trace norm discrepancy " << std::abs(partial - tn.partial) << "\n";
  }
  write_json(run.artifact("resolvent.json"), report);
  out << "op_norm = " << op << "\ntrace_norm = " << tn.total() << " (partial " << tn.partial << ", tail " << tn.tail
      << ")\ntelescoping_residual = " << tele << "\n";
  return kExitOk;
}

int cmd_quasimode(const Flags& flags, const KeyValues& kv, Run& run, std::ostream& out) {
  kv.require_known(with_tower_keys({"truncations", "lambda", "theta", "h", "points_per_wavelength"}));
  const TowerSpec spec = tower_from_keyvalues(kv);
  const double lambda = flags.lambda_opt && flags.lambda_opt->count() ? flags.lambda : kv.get_double("lambda", 0.0);
  ScanOptions options;
  options.h = spacing(flags, kv, options.h);
  options.theta = kv.get_double("theta", 0.0);
  options.points_per_wavelength = kv.get_double("points_per_wavelength", options.points_per_wavelength);
  std::vector<std::size_t> truncations;
  if (kv.has("truncations")) {
    for (auto t : kv.get_int_list("truncations")) {
      if (t < 1) throw ValidationError("truncations must be >= 1");
      truncations.push_back(static_cast<std::size_t>(t));
    }
  } else {
    truncations.push_back(spec.count());
  }

  const auto scan = residual_scan(spec, lambda, truncations, options);
  write_json(run.artifact("scan.json"), to_json(scan));
  std::ostringstream table;
  table << std::setprecision(12);
  for (const auto& r : scan.rows) table << r.R << " " << r.h.str() << " " << r.residual << "\n";
  if (scan.slope) table << "slope " << *scan.slope << "\n";
  std::ofstream(run.artifact("scan.txt")) << table.str();
  out << table.str();
  for (const auto& w : scan.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  kernels::configure_threads();
  CLI::App app{"Dirichlet Laplacian on towers of cubes: spectra, window construction, resolvent differences, "
               "quasi-modes"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  Flags flags;

  auto common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Config file (key = value)");
    sub->add_option("--out", flags.out, "Output directory (default runs/<command>-<timestamp>-<pid>)");
  };
  auto* spectrum = app.add_subcommand("spectrum", "Lowest eigenvalues of a truncated tower");
  common(spectrum);
  spectrum->add_option("--seed", flags.seed, "Solver seed");
  spectrum->add_option("--h", flags.h, "Grid spacing (dyadic, e.g. 1/32)");
  spectrum->add_flag("--analytic-check", flags.analytic_check, "Compare closed cubes with the analytic spectrum");
  spectrum->add_flag("--dense-oracle", flags.dense_oracle, "Compare with a dense eigendecomposition");
  spectrum->add_flag("--dump-fields", flags.dump_fields, "Write eigenfunctions as x y value rows");

  auto* construct = app.add_subcommand("construct", "Grow the tower window by window");
  common(construct);
  construct->add_option("--seed", flags.seed, "Solver seed");
  construct->add_option("--h", flags.h, "Initial grid spacing h0");
  flags.ell_opt = construct->add_option("--ell", flags.ell, "Resolvent power of the trace condition");
  construct->add_flag("--verify", flags.verify, "Fail when a uniform bound is violated");
  construct->add_flag("--dump-fields", flags.dump_fields, "Write every accepted eigenfunction");
  construct->add_option("--replay", flags.replay, "Recompute the eigenvalues of a saved trace");

  auto* resolvent = app.add_subcommand("resolvent", "Resolvent difference between two window configurations");
  common(resolvent);
  resolvent->add_option("--seed", flags.seed, "Probe and solver seed");
  resolvent->add_option("--h", flags.h, "Grid spacing");
  auto* ell_r = resolvent->add_option("--ell", flags.ell, "Resolvent power");
  resolvent->add_flag("--dense-oracle", flags.dense_oracle, "Compare with dense linear algebra");

  auto* quasimode = app.add_subcommand("quasimode", "Residuals of cut-off plane waves in growing cubes");
  common(quasimode);
  quasimode->add_option("--h", flags.h, "Grid spacing");
  flags.lambda_opt = quasimode->add_option("--lambda", flags.lambda, "Target spectral point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }
  if (resolvent->parsed()) flags.ell_opt = ell_r;
  const std::string command = spectrum->parsed()    ? "spectrum"
                              : construct->parsed() ? "construct"
                              : resolvent->parsed() ? "resolvent"
                                                    : "quasimode";

  KeyValues kv;
  try {
    if (!flags.config.empty())
      kv = KeyValues::load(flags.config);
    else if (command != "construct")
      throw ValidationError("--config is required for " + command);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  std::optional<Run> run;
  int status = kExitOk;
  std::string message;
  try {
    run.emplace(command, flags, kv);
    if (command == "spectrum")
      status = cmd_spectrum(flags, kv, *run, out);
    else if (command == "construct")
      status = cmd_construct(flags, kv, *run, out);
    else if (command == "resolvent")
      status = cmd_resolvent(flags, kv, *run, out);
    else
      status = cmd_quasimode(flags, kv, *run, out);
  } catch (const ValidationError& e) {
    status = kExitValidation;
    message = e.what();
  } catch (const NumericalError& e) {
    status = kExitNumerical;
    message = e.what();
  } catch (const std::exception& e) {
    status = kExitNumerical;
    message = e.what();
  }
  if (!message.empty()) err << "error: " << message << "\n";
  if (run) {
    try {
      run->finish(status, message);
      out << "output: " << run->dir().string() << "\n";
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << "\n";
    }
  }
  return status;
}

}  // namespace spectral_tower
