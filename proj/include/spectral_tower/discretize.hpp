#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "spectral_tower/dyadic.hpp"
#include "spectral_tower/geometry.hpp"
#include "spectral_tower/kernels.hpp"

namespace spectral_tower {

struct LatticePoint {
  std::int64_t i = 0;
  std::int64_t j = 0;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

/// Interior nodes of a truncated tower on the uniform lattice h·Z².
///
/// Nodes are ordered lexicographically by (i, j), i.e. column by column from
/// left to right. Every tower breakpoint is an exact lattice coordinate.
class GridDomain {
 public:
  GridDomain(TowerSpec spec, std::size_t open_windows, Dyadic h, std::vector<LatticePoint> nodes);

  const TowerSpec& spec() const { return spec_; }
  std::size_t cubes() const { return spec_.count(); }
  std::size_t open_windows() const { return open_windows_; }
  const Dyadic& spacing() const { return h_; }
  double h() const { return h_value_; }
  /// Quadrature weight h^d of the grid L² inner product.
  double cell_volume() const { return h_value_ * h_value_; }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<LatticePoint>& nodes() const { return nodes_; }
  Point coordinate(std::size_t k) const;
  std::optional<std::size_t> index_of(LatticePoint p) const;

 private:
  TowerSpec spec_;
  std::size_t open_windows_;
  Dyadic h_;
  double h_value_;
  std::vector<LatticePoint> nodes_;
  std::int64_t i_lo_ = 0, j_lo_ = 0, width_ = 0, height_ = 0;
  std::vector<int> index_map_;
};

/// Symmetric sparse matrix acting on grid functions.
class SparseSymmetricOperator {
 public:
  SparseSymmetricOperator() = default;
  SparseSymmetricOperator(kernels::CsrMatrix csr, double cell_volume);

  std::size_t size() const { return static_cast<std::size_t>(csr_.rows); }
  const kernels::CsrMatrix& csr() const { return csr_; }
  bool symmetric() const { return symmetric_; }
  double cell_volume() const { return cell_volume_; }
  /// max_i Σ_j |a_ij|, an upper bound on the spectral radius.
  double bound() const { return bound_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(std::span<const double> x) const;

  /// A - shift·I in Eigen storage.
  Eigen::SparseMatrix<double> to_eigen(double shift = 0.0) const;
  Eigen::MatrixXd to_dense() const;

 private:
  kernels::CsrMatrix csr_;
  double cell_volume_ = 1.0;
  double bound_ = 0.0;
  bool symmetric_ = false;
};

struct Discretization {
  GridDomain grid;
  SparseSymmetricOperator op;
};

/// Five-point Dirichlet Laplacian on the first n_cubes cubes with the first
/// open_windows windows opened, at spacing h.
Discretization assemble(const TowerSpec& spec, std::size_t n_cubes, std::size_t open_windows, const Dyadic& h);

/// Zero extension from a nested grid domain into a larger one (same spacing,
/// same leading cubes, subset of nodes).
class Embedding {
 public:
  Embedding(const GridDomain& small, const GridDomain& large);

  std::size_t small_size() const { return map_.size(); }
  std::size_t large_size() const { return large_size_; }
  const std::vector<std::size_t>& map() const { return map_; }

  void embed(std::span<const double> v, std::span<double> out) const;
  std::vector<double> embed(std::span<const double> v) const;
  void restrict_to(std::span<const double> v, std::span<double> out) const;
  std::vector<double> restrict_to(std::span<const double> v) const;

 private:
  std::vector<std::size_t> map_;
  std::size_t large_size_ = 0;
};

std::vector<double> embed(const GridDomain& small, const GridDomain& large, std::span<const double> v);
std::vector<double> restrict_to(const GridDomain& large, const GridDomain& small, std::span<const double> v);

double l2_inner(const GridDomain& g, std::span<const double> u, std::span<const double> v);
double l2_norm(const GridDomain& g, std::span<const double> v);

/// Grid L² norm of v over the nodes inside region r.
double region_mass(const GridDomain& g, std::span<const double> v, const Region& r);

/// Connected components of the five-point adjacency graph.
std::size_t components(const GridDomain& g);

/// Nodes lying on the face of window n (the cells that the window opens).
std::size_t window_face_nodes(const GridDomain& g, std::size_t window);

/// Rows "x y value" in node order.
void write_field(std::ostream& out, const GridDomain& g, std::span<const double> v);

}  // namespace spectral_tower
