#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spectral_tower/discretize.hpp"
#include "spectral_tower/geometry.hpp"

namespace spectral_tower {

/// Cut-off plane wave cos(k·(x - center)) χ(|x₁ - c₁|/R) χ(|x₂ - c₂|/R),
/// χ(t) = cos²(πt/2) on [0, 1) and 0 beyond.
struct QuasiMode {
  double lambda = 0.0;
  Point k;
  Point center;
  double R = 1.0;
  std::string profile = "cos2-tensor";
};

/// Wave vector √λ(cos θ, sin θ). Throws ValidationError for λ < 0 or R <= 0.
QuasiMode make_quasimode(double lambda, double theta, Point center, double R);

struct InscribedCube {
  Point center;
  double R = 0.0;
};

/// The last cube of the truncation with n cubes (1 <= n <= N).
InscribedCube largest_inscribed_cube(const TowerSpec& spec, std::size_t n);

/// Grid samples normalized to unit grid L² norm. Throws ValidationError when
/// the support cube leaves the domain.
std::vector<double> build_quasimode(const GridDomain& g, const QuasiMode& q);

/// ‖(A - λ)u‖ in the grid L² norm.
double residual(const SparseSymmetricOperator& a, std::span<const double> u, double lambda);

struct ScanRow {
  std::size_t truncation = 0;
  double R = 0.0;
  Dyadic h;
  std::size_t nodes = 0;
  double residual = 0.0;
};

struct ScanOptions {
  Dyadic h = Dyadic::ratio(1, 16);
  double theta = 0.0;
  /// Minimum grid points per wavelength 2π/√λ.
  double points_per_wavelength = 10.0;
};

struct ResidualScan {
  double lambda = 0.0;
  std::vector<ScanRow> rows;
  /// Least-squares slope of log residual against log R (two or more radii).
  std::optional<double> slope;
  std::vector<std::string> warnings;
};

ResidualScan residual_scan(const TowerSpec& spec, double lambda, const std::vector<std::size_t>& truncations,
                           const ScanOptions& options = {});

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace spectral_tower
