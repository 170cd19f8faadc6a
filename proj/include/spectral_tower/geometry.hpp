#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spectral_tower/config.hpp"
#include "spectral_tower/dyadic.hpp"

namespace spectral_tower {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// A tower of open squares Q_{a_n}(x_n, 0) placed along the first axis so
/// that consecutive squares touch, joined by window squares Q_{δ_n}(x_n + a_n).
///
/// Cubes and windows are indexed from 0 in code. Window n joins cube n and
/// cube n+1. The window list may be shorter than count() - 1 while a tower is
/// being grown; missing windows are simply never opened.
///
/// Invariants (checked on construction):
///  - a_0 > 0 and a_{n+1} >= a_n + scale (scale is 1 unless rescaled);
///  - 0 < δ_n <= min(a_n, a_{n+1}) and δ_n <= a_0;
///  - dim == 2.
class TowerSpec {
 public:
  TowerSpec(std::vector<Dyadic> halfwidths, std::vector<Dyadic> windows, Dyadic scale = Dyadic(1),
            int dim = 2);

  int dim() const { return dim_; }
  std::size_t count() const { return halfwidths_.size(); }
  std::size_t window_count() const { return windows_.size(); }

  const std::vector<Dyadic>& halfwidths() const { return halfwidths_; }
  const std::vector<Dyadic>& windows() const { return windows_; }
  const std::vector<Dyadic>& centers() const { return centers_; }

  const Dyadic& halfwidth(std::size_t n) const { return halfwidths_.at(n); }
  const Dyadic& center(std::size_t n) const { return centers_.at(n); }
  const Dyadic& window(std::size_t n) const { return windows_.at(n); }
  /// Abscissa of the face shared by cube n and cube n+1.
  Dyadic face(std::size_t n) const { return centers_.at(n) + halfwidths_.at(n); }

  /// Rescaling factor relative to the unit-growth tower (metadata only).
  const Dyadic& scale() const { return scale_; }

  /// Smallest power of two B such that every length is an integer multiple of 1/B.
  std::int64_t base_unit() const;

  /// Total area of the cubes (windows add measure zero beyond the cubes).
  double area() const;

  friend bool operator==(const TowerSpec&, const TowerSpec&) = default;

 private:
  int dim_ = 2;
  std::vector<Dyadic> halfwidths_;
  std::vector<Dyadic> windows_;
  std::vector<Dyadic> centers_;
  Dyadic scale_{1};
};

/// Builds a tower from half-widths a and window half-widths δ (|δ| = |a| - 1).
/// Centers follow x_0 = a_0, x_{n+1} = x_n + a_n + a_{n+1}.
TowerSpec tower_from_halfwidths(const std::vector<Dyadic>& halfwidths, const std::vector<Dyadic>& windows);

/// First n cubes and first n-1 windows (n >= 1).
TowerSpec truncate(const TowerSpec& spec, std::size_t n);

/// Every length multiplied by alpha; the growth invariant becomes a_{n+1} >= a_n + alpha.
TowerSpec rescale(const TowerSpec& spec, const Dyadic& alpha);

/// Membership in the open set made of all cubes plus the first open_windows windows.
bool contains(const TowerSpec& spec, std::size_t open_windows, Point p);

struct Region {
  enum class Kind { cube, window, truncated, full };

  Kind kind = Kind::full;
  /// Cube or window index for cube/window; number of leading cubes for truncated.
  std::size_t index = 0;
  /// Select the nodes outside the region instead.
  bool complement = false;

  static Region cube(std::size_t n) { return {Kind::cube, n, false}; }
  static Region window(std::size_t n) { return {Kind::window, n, false}; }
  static Region truncated(std::size_t n) { return {Kind::truncated, n, false}; }
  static Region full() { return {Kind::full, 0, false}; }
  Region outside() const { return {kind, index, !complement}; }
};

/// Point membership in a region of the tower with open_windows windows open.
bool region_contains(const TowerSpec& spec, std::size_t open_windows, const Region& region, Point p);

/// Tower file: keys dim, base_unit, halfwidths, windows (integers in units of 1/base_unit).
TowerSpec tower_from_keyvalues(const KeyValues& kv);
std::string format_tower(const TowerSpec& spec);

}  // namespace spectral_tower
