#include "spectral_tower/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "spectral_tower/errors.hpp"

namespace spectral_tower {

namespace {

std::int64_t lattice(const Dyadic& length, const Dyadic& h, const std::string& what) {
  if (!length.is_multiple_of(h))
    throw ValidationError("grid alignment failure: " + what + " = " + length.str() + " is not a multiple of h = " +
                          h.str());
  return length.divide_exact(h);
}

}  // namespace

GridDomain::GridDomain(TowerSpec spec, std::size_t open_windows, Dyadic h, std::vector<LatticePoint> nodes)
    : spec_(std::move(spec)),
      open_windows_(open_windows),
      h_(h),
      h_value_(h.to_double()),
      nodes_(std::move(nodes)) {
  if (nodes_.empty()) return;
  std::int64_t i_hi = nodes_.front().i, j_hi = nodes_.front().j;
  i_lo_ = i_hi;
  j_lo_ = j_hi;
  for (const auto& p : nodes_) {
    i_lo_ = std::min(i_lo_, p.i);
    i_hi = std::max(i_hi, p.i);
    j_lo_ = std::min(j_lo_, p.j);
    j_hi = std::max(j_hi, p.j);
  }
  width_ = i_hi - i_lo_ + 1;
  height_ = j_hi - j_lo_ + 1;
  index_map_.assign(static_cast<std::size_t>(width_ * height_), -1);
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& p = nodes_[k];
    index_map_[static_cast<std::size_t>((p.i - i_lo_) * height_ + (p.j - j_lo_))] = static_cast<int>(k);
  }
}

Point GridDomain::coordinate(std::size_t k) const {
  const auto& p = nodes_.at(k);
  return {static_cast<double>(p.i) * h_value_, static_cast<double>(p.j) * h_value_};
}

std::optional<std::size_t> GridDomain::index_of(LatticePoint p) const {
  if (p.i < i_lo_ || p.i >= i_lo_ + width_ || p.j < j_lo_ || p.j >= j_lo_ + height_) return std::nullopt;
  const int k = index_map_[static_cast<std::size_t>((p.i - i_lo_) * height_ + (p.j - j_lo_))];
  if (k < 0) return std::nullopt;
  return static_cast<std::size_t>(k);
}

SparseSymmetricOperator::SparseSymmetricOperator(kernels::CsrMatrix csr, double cell_volume)
    : csr_(std::move(csr)), cell_volume_(cell_volume) {
  bound_ = 0.0;
  for (int i = 0; i < csr_.rows; ++i) {
    double row = 0.0;
    for (int p = csr_.row_ptr[i]; p < csr_.row_ptr[i + 1]; ++p) row += std::abs(csr_.values[p]);
    bound_ = std::max(bound_, row);
  }
  // Pattern and value symmetry via a transpose lookup on sorted rows.
  symmetric_ = true;
  for (int i = 0; i < csr_.rows && symmetric_; ++i) {
    for (int p = csr_.row_ptr[i]; p < csr_.row_ptr[i + 1]; ++p) {
      const int j = csr_.cols[p];
      const auto first = csr_.cols.begin() + csr_.row_ptr[j];
      const auto last = csr_.cols.begin() + csr_.row_ptr[j + 1];
      const auto it = std::lower_bound(first, last, i);
      if (it == last || *it != i || csr_.values[static_cast<std::size_t>(it - csr_.cols.begin())] != csr_.values[p]) {
        symmetric_ = false;
        break;
      }
    }
  }
}

void SparseSymmetricOperator::apply(std::span<const double> x, std::span<double> y) const {
  kernels::spmv(csr_, x, y);
}

std::vector<double> SparseSymmetricOperator::apply(std::span<const double> x) const {
  std::vector<double> y(size());
  apply(x, y);
  return y;
}

Eigen::SparseMatrix<double> SparseSymmetricOperator::to_eigen(double shift) const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(csr_.nonzeros());
  for (int i = 0; i < csr_.rows; ++i) {
    for (int p = csr_.row_ptr[i]; p < csr_.row_ptr[i + 1]; ++p) {
      const int j = csr_.cols[p];
      triplets.emplace_back(i, j, i == j ? csr_.values[p] - shift : csr_.values[p]);
    }
  }
  Eigen::SparseMatrix<double> m(csr_.rows, csr_.rows);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::MatrixXd SparseSymmetricOperator::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(csr_.rows, csr_.rows);
  for (int i = 0; i < csr_.rows; ++i)
    for (int p = csr_.row_ptr[i]; p < csr_.row_ptr[i + 1]; ++p) m(i, csr_.cols[p]) = csr_.values[p];
  return m;
}

Discretization assemble(const TowerSpec& full_spec, std::size_t n_cubes, std::size_t open_windows, const Dyadic& h) {
  if (!h.is_positive()) throw ValidationError("grid spacing must be positive");
  TowerSpec spec = truncate(full_spec, n_cubes);
  if (open_windows + 1 > n_cubes || open_windows > spec.window_count())
    throw ValidationError("cannot open " + std::to_string(open_windows) + " windows on " + std::to_string(n_cubes) +
                          " cubes with " + std::to_string(spec.window_count()) + " window widths");

  const std::size_t n = spec.count();
  std::vector<std::int64_t> cx(n), ca(n);
  for (std::size_t k = 0; k < n; ++k) {
    cx[k] = lattice(spec.center(k), h, "center x_" + std::to_string(k + 1));
    ca[k] = lattice(spec.halfwidth(k), h, "half-width a_" + std::to_string(k + 1));
  }
  std::vector<std::int64_t> wd(open_windows);
  for (std::size_t k = 0; k < open_windows; ++k) {
    if (spec.window(k) < h)
      throw ValidationError("window unresolved: delta_" + std::to_string(k + 1) + " = " + spec.window(k).str() +
                            " is narrower than h = " + h.str() + "; refine h");
    wd[k] = lattice(spec.window(k), h, "window delta_" + std::to_string(k + 1));
  }

  auto inside = [&](std::int64_t i, std::int64_t j) {
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(i - cx[k]) < ca[k] && std::abs(j) < ca[k]) return true;
    for (std::size_t k = 0; k < open_windows; ++k)
      if (std::abs(i - (cx[k] + ca[k])) < wd[k] && std::abs(j) < wd[k]) return true;
    return false;
  };

  std::vector<LatticePoint> nodes;
  for (std::size_t k = 0; k < n; ++k)
    for (std::int64_t i = cx[k] - ca[k] + 1; i < cx[k] + ca[k]; ++i)
      for (std::int64_t j = -ca[k] + 1; j < ca[k]; ++j) nodes.push_back({i, j});
  for (std::size_t k = 0; k < open_windows; ++k) {
    const std::int64_t face = cx[k] + ca[k];
    for (std::int64_t i = face - wd[k] + 1; i < face + wd[k]; ++i)
      for (std::int64_t j = -wd[k] + 1; j < wd[k]; ++j)
        if (inside(i, j)) nodes.push_back({i, j});
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (nodes.size() > static_cast<std::size_t>(std::numeric_limits<int>::max() / 8))
    throw ValidationError("grid too large");

  GridDomain grid(spec, open_windows, h, std::move(nodes));

  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  kernels::CsrMatrix csr;
  csr.rows = static_cast<int>(grid.size());
  csr.row_ptr.reserve(grid.size() + 1);
  csr.cols.reserve(5 * grid.size());
  csr.values.reserve(5 * grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto p = grid.nodes()[k];
    const LatticePoint neighbours[5] = {{p.i - 1, p.j}, {p.i, p.j - 1}, p, {p.i, p.j + 1}, {p.i + 1, p.j}};
    for (const auto& q : neighbours) {
      if (q == p) {
        csr.cols.push_back(static_cast<int>(k));
        csr.values.push_back(4.0 * inv_h2);
      } else if (const auto idx = grid.index_of(q)) {
        csr.cols.push_back(static_cast<int>(*idx));
        csr.values.push_back(-inv_h2);
      }
    }
    csr.row_ptr.push_back(static_cast<int>(csr.cols.size()));
  }
  SparseSymmetricOperator op(std::move(csr), grid.cell_volume());
  return {std::move(grid), std::move(op)};
}

Embedding::Embedding(const GridDomain& small, const GridDomain& large) : large_size_(large.size()) {
  if (small.spacing() != large.spacing())
    throw ValidationError("nesting violation: spacings differ (" + small.spacing().str() + " vs " +
                          large.spacing().str() + ")");
  if (small.cubes() > large.cubes() ||
      !std::equal(small.spec().halfwidths().begin(), small.spec().halfwidths().end(),
                  large.spec().halfwidths().begin()))
    throw ValidationError("nesting violation: cube sequence of the smaller domain is not a prefix");
  map_.reserve(small.size());
  for (const auto& p : small.nodes()) {
    const auto idx = large.index_of(p);
    if (!idx) throw ValidationError("nesting violation: node not contained in the larger domain");
    map_.push_back(*idx);
  }
}

void Embedding::embed(std::span<const double> v, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < map_.size(); ++k) out[map_[k]] = v[k];
}

std::vector<double> Embedding::embed(std::span<const double> v) const {
  if (v.size() != map_.size()) throw ValidationError("embed: vector length does not match the smaller domain");
  std::vector<double> out(large_size_);
  embed(v, out);
  return out;
}

void Embedding::restrict_to(std::span<const double> v, std::span<double> out) const {
  for (std::size_t k = 0; k < map_.size(); ++k) out[k] = v[map_[k]];
}

std::vector<double> Embedding::restrict_to(std::span<const double> v) const {
  if (v.size() != large_size_) throw ValidationError("restrict: vector length does not match the larger domain");
  std::vector<double> out(map_.size());
  restrict_to(v, out);
  return out;
}

std::vector<double> embed(const GridDomain& small, const GridDomain& large, std::span<const double> v) {
  return Embedding(small, large).embed(v);
}

std::vector<double> restrict_to(const GridDomain& large, const GridDomain& small, std::span<const double> v) {
  return Embedding(small, large).restrict_to(v);
}

double l2_inner(const GridDomain& g, std::span<const double> u, std::span<const double> v) {
  return g.cell_volume() * kernels::dot(u, v);
}

double l2_norm(const GridDomain& g, std::span<const double> v) { return std::sqrt(l2_inner(g, v, v)); }

double region_mass(const GridDomain& g, std::span<const double> v, const Region& r) {
  if (v.size() != g.size()) throw ValidationError("region_mass: vector length does not match the grid");
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (region_contains(g.spec(), g.open_windows(), r, g.coordinate(k))) s += v[k] * v[k];
  return std::sqrt(g.cell_volume() * s);
}

std::size_t components(const GridDomain& g) {
  std::vector<char> seen(g.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t count = 0;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (seen[start]) continue;
    ++count;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      const auto p = g.nodes()[k];
      const LatticePoint nb[4] = {{p.i - 1, p.j}, {p.i + 1, p.j}, {p.i, p.j - 1}, {p.i, p.j + 1}};
      for (const auto& q : nb) {
        if (const auto idx = g.index_of(q); idx && !seen[*idx]) {
          seen[*idx] = 1;
          stack.push_back(*idx);
        }
      }
    }
  }
  return count;
}

std::size_t window_face_nodes(const GridDomain& g, std::size_t window) {
  if (window >= g.open_windows()) return 0;
  const double face = g.spec().face(window).to_double();
  std::size_t count = 0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.coordinate(k).x == face) ++count;
  return count;
}

void write_field(std::ostream& out, const GridDomain& g, std::span<const double> v) {
  char line[96];
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto c = g.coordinate(k);
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", c.x, c.y, v[k]);
    out << line;
  }
}

}  // namespace spectral_tower
