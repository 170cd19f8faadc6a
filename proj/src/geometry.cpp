#include "spectral_tower/geometry.hpp"

#include <cmath>
#include <sstream>

#include "spectral_tower/errors.hpp"

namespace spectral_tower {

namespace {

std::string idx(std::size_t n) { return std::to_string(n + 1); }

bool in_square(double cx, double half, Point p) {
  return std::abs(p.x - cx) < half && std::abs(p.y) < half;
}

}  // namespace

TowerSpec::TowerSpec(std::vector<Dyadic> halfwidths, std::vector<Dyadic> windows, Dyadic scale, int dim)
    : dim_(dim), halfwidths_(std::move(halfwidths)), windows_(std::move(windows)), scale_(scale) {
  if (dim_ != 2) throw ValidationError("only dim = 2 is supported (got " + std::to_string(dim_) + ")");
  if (!scale_.is_positive()) throw ValidationError("rescaling factor must be positive");
  if (halfwidths_.empty()) throw ValidationError("tower needs at least one cube");
  if (windows_.size() + 1 > halfwidths_.size())
    throw ValidationError("too many windows: " + std::to_string(windows_.size()) + " for " +
                          std::to_string(halfwidths_.size()) + " cubes");
  for (std::size_t n = 0; n < halfwidths_.size(); ++n) {
    if (!halfwidths_[n].is_positive())
      throw ValidationError("half-width a_" + idx(n) + " = " + halfwidths_[n].str() + " must be positive");
    if (n > 0 && halfwidths_[n] < halfwidths_[n - 1] + scale_)
      throw ValidationError("half-width a_" + idx(n) + " = " + halfwidths_[n].str() + " violates a_" + idx(n) +
                            " >= a_" + idx(n - 1) + " + " + scale_.str());
  }
  for (std::size_t n = 0; n < windows_.size(); ++n) {
    const Dyadic& d = windows_[n];
    if (!d.is_positive()) throw ValidationError("window delta_" + idx(n) + " must be positive");
    if (d > min(halfwidths_[n], halfwidths_[n + 1]))
      throw ValidationError("window delta_" + idx(n) + " = " + d.str() + " exceeds min(a_" + idx(n) + ", a_" +
                            idx(n + 1) + ")");
    if (d > halfwidths_[0])
      throw ValidationError("window delta_" + idx(n) + " = " + d.str() + " exceeds a_1 = " + halfwidths_[0].str());
  }
  centers_.reserve(halfwidths_.size());
  centers_.push_back(halfwidths_[0]);
  for (std::size_t n = 1; n < halfwidths_.size(); ++n)
    centers_.push_back(centers_[n - 1] + halfwidths_[n - 1] + halfwidths_[n]);
}

std::int64_t TowerSpec::base_unit() const {
  std::int64_t unit = 1;
  auto widen = [&](const Dyadic& d) { unit = std::max(unit, d.denominator()); };
  for (const auto& a : halfwidths_) widen(a);
  for (const auto& d : windows_) widen(d);
  return unit;
}

double TowerSpec::area() const {
  double total = 0.0;
  for (const auto& a : halfwidths_) total += 4.0 * a.to_double() * a.to_double();
  return total;
}

TowerSpec tower_from_halfwidths(const std::vector<Dyadic>& halfwidths, const std::vector<Dyadic>& windows) {
  if (halfwidths.empty()) throw ValidationError("tower needs at least one cube");
  if (windows.size() + 1 != halfwidths.size())
    throw ValidationError("expected " + std::to_string(halfwidths.size() - 1) + " windows, got " +
                          std::to_string(windows.size()));
  return TowerSpec(halfwidths, windows);
}

TowerSpec truncate(const TowerSpec& spec, std::size_t n) {
  if (n < 1 || n > spec.count())
    throw ValidationError("truncation level " + std::to_string(n) + " outside [1, " + std::to_string(spec.count()) +
                          "]");
  std::vector<Dyadic> a(spec.halfwidths().begin(), spec.halfwidths().begin() + static_cast<std::ptrdiff_t>(n));
  const std::size_t w = std::min(spec.window_count(), n - 1);
  std::vector<Dyadic> d(spec.windows().begin(), spec.windows().begin() + static_cast<std::ptrdiff_t>(w));
  return TowerSpec(std::move(a), std::move(d), spec.scale(), spec.dim());
}

TowerSpec rescale(const TowerSpec& spec, const Dyadic& alpha) {
  if (!alpha.is_positive()) throw ValidationError("rescaling factor must be positive, got " + alpha.str());
  std::vector<Dyadic> a;
  std::vector<Dyadic> d;
  for (const auto& v : spec.halfwidths()) a.push_back(v * alpha);
  for (const auto& v : spec.windows()) d.push_back(v * alpha);
  return TowerSpec(std::move(a), std::move(d), spec.scale() * alpha, spec.dim());
}

bool contains(const TowerSpec& spec, std::size_t open_windows, Point p) {
  return region_contains(spec, open_windows, Region::full(), p);
}

bool region_contains(const TowerSpec& spec, std::size_t open_windows, const Region& region, Point p) {
  const std::size_t open = std::min(open_windows, spec.window_count());
  auto cube_hit = [&](std::size_t n) {
    return in_square(spec.center(n).to_double(), spec.halfwidth(n).to_double(), p);
  };
  auto window_hit = [&](std::size_t n) {
    return n < open && in_square(spec.face(n).to_double(), spec.window(n).to_double(), p);
  };
  bool inside = false;
  switch (region.kind) {
    case Region::Kind::cube:
      inside = region.index < spec.count() && cube_hit(region.index);
      break;
    case Region::Kind::window:
      inside = window_hit(region.index);
      break;
    case Region::Kind::truncated:
    case Region::Kind::full: {
      const std::size_t cubes = region.kind == Region::Kind::full ? spec.count() : std::min(region.index, spec.count());
      const std::size_t windows = cubes == 0 ? 0 : cubes - 1;
      for (std::size_t n = 0; n < cubes && !inside; ++n) inside = cube_hit(n);
      for (std::size_t n = 0; n < windows && !inside; ++n) inside = window_hit(n);
      break;
    }
  }
  if (!region.complement) return inside;
  return !inside && contains(spec, open_windows, p);
}

TowerSpec tower_from_keyvalues(const KeyValues& kv) {
  const std::int64_t dim = kv.get_int("dim", 2);
  const std::int64_t base = kv.get_int("base_unit", 1);
  if (base <= 0 || (base & (base - 1)) != 0)
    throw ValidationError("base_unit must be a positive power of two, got " + std::to_string(base));
  std::vector<Dyadic> a;
  std::vector<Dyadic> d;
  for (auto v : kv.get_int_list("halfwidths")) a.push_back(Dyadic::ratio(v, base));
  if (kv.has("windows"))
    for (auto v : kv.get_int_list("windows")) d.push_back(Dyadic::ratio(v, base));
  if (dim != 2) throw ValidationError("only dim = 2 is supported (got " + std::to_string(dim) + ")");
  return TowerSpec(std::move(a), std::move(d), kv.get_dyadic("scale", Dyadic(1)), static_cast<int>(dim));
}

std::string format_tower(const TowerSpec& spec) {
  const std::int64_t base = spec.base_unit();
  const Dyadic unit = Dyadic::ratio(1, base);
  std::ostringstream out;
  out << "dim = " << spec.dim() << "\n";
  out << "base_unit = " << base << "\n";
  auto list = [&](const std::vector<Dyadic>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i].divide_exact(unit);
  };
  out << "halfwidths = ";
  list(spec.halfwidths());
  out << "\nwindows = ";
  list(spec.windows());
  out << "\n";
  if (spec.scale() != Dyadic(1)) out << "scale = " << spec.scale().str() << "\n";
  return out.str();
}

}  // namespace spectral_tower
