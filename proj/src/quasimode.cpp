#include "spectral_tower/quasimode.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "spectral_tower/errors.hpp"

namespace spectral_tower {

namespace {

double cutoff(double t) {
  t = std::abs(t);
  if (t >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * t);
  return c * c;
}

}  // namespace

QuasiMode make_quasimode(double lambda, double theta, Point center, double R) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ValidationError("quasimode target lambda must be >= 0");
  if (!(R > 0.0)) throw ValidationError("quasimode radius must be positive");
  const double s = std::sqrt(lambda);
  return {lambda, {s * std::cos(theta), s * std::sin(theta)}, center, R, "cos2-tensor"};
}

InscribedCube largest_inscribed_cube(const TowerSpec& spec, std::size_t n) {
  if (n < 1 || n > spec.count())
    throw ValidationError("truncation " + std::to_string(n) + " outside [1, " + std::to_string(spec.count()) + "]");
  return {{spec.center(n - 1).to_double(), 0.0}, spec.halfwidth(n - 1).to_double()};
}

std::vector<double> build_quasimode(const GridDomain& g, const QuasiMode& q) {
  const double kk = q.k.x * q.k.x + q.k.y * q.k.y;
  if (std::abs(kk - q.lambda) > 1e-12 * std::max(1.0, q.lambda))
    throw ValidationError("quasimode wave vector does not satisfy |k|^2 = lambda");
  // The support cube must be one of the tower cubes (or inside one).
  bool inside = false;
  for (std::size_t n = 0; n < g.cubes() && !inside; ++n) {
    const double c = g.spec().center(n).to_double(), a = g.spec().halfwidth(n).to_double();
    inside = q.center.x - q.R >= c - a && q.center.x + q.R <= c + a && std::abs(q.center.y) + q.R <= a;
  }
  if (!inside) throw ValidationError("quasimode support cube is not contained in the domain");

  std::vector<double> u(g.size(), 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point p = g.coordinate(i);
    const double dx = p.x - q.center.x, dy = p.y - q.center.y;
    const double chi = cutoff(dx / q.R) * cutoff(dy / q.R);
    if (chi == 0.0) continue;
    u[i] = std::cos(q.k.x * dx + q.k.y * dy) * chi;
    mass += u[i] * u[i];
  }
  const double norm = std::sqrt(g.cell_volume() * mass);
  if (!(norm > 0.0)) throw ValidationError("quasimode support contains no grid node");
  for (auto& v : u) v /= norm;
  return u;
}

double residual(const SparseSymmetricOperator& a, std::span<const double> u, double lambda) {
  if (u.size() != a.size()) throw ValidationError("residual: vector length mismatch");
  auto r = a.apply(u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= lambda * u[i];
  return std::sqrt(a.cell_volume()) * kernels::norm2(r);
}

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

ResidualScan residual_scan(const TowerSpec& spec, double lambda, const std::vector<std::size_t>& truncations,
                           const ScanOptions& options) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");
  if (truncations.empty()) throw ValidationError("residual scan needs at least one truncation");
  if (lambda > 0.0) {
    const double wavelength = 2.0 * std::numbers::pi / std::sqrt(lambda);
    const double hmax = wavelength / options.points_per_wavelength;
    if (options.h.to_double() > hmax) {
      Dyadic required(1);
      while (required.to_double() > hmax) required = required.half();
      std::ostringstream msg;
      msg << "under-resolved wavelength " << wavelength << " at h = " << options.h.str() << "; need h <= "
          << required.str();
      throw ValidationError(msg.str());
    }
  }

  ResidualScan scan;
  scan.lambda = lambda;
  std::vector<double> radii, values;
  for (const std::size_t n : truncations) {
    const auto cube = largest_inscribed_cube(spec, n);
    const auto disc = assemble(spec, n, std::min(n - 1, spec.window_count()), options.h);
    const auto q = make_quasimode(lambda, options.theta, cube.center, cube.R);
    const auto u = build_quasimode(disc.grid, q);
    ScanRow row{n, cube.R, options.h, disc.grid.size(), residual(disc.op, u, lambda)};
    if (!scan.rows.empty() && row.R > scan.rows.back().R && row.residual > 1.05 * scan.rows.back().residual) {
      std::ostringstream msg;
      msg << "residual increased from R = " << scan.rows.back().R << " to R = " << row.R
          << " beyond the 5% tolerance (grid resonance)";
      scan.warnings.push_back(msg.str());
    }
    scan.rows.push_back(row);
    radii.push_back(row.R);
    values.push_back(row.residual);
  }
  scan.slope = loglog_slope(radii, values);
  return scan;
}

}  // namespace spectral_tower
