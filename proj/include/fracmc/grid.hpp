#pragma once

// Uniform rectangular meshes on the unit square, coarse partitions with
// oversampling, two-continuum label maps and piecewise-constant conductivity.

#include "fracmc/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace fracmc {

/// Half-open box of fine cells [x0, x1) x [y0, y1) in global cell indices.
struct CellBox {
  Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  Index nx() const { return x1 - x0; }
  Index ny() const { return y1 - y0; }
  Index cell_count() const { return nx() * ny(); }
  bool contains(Index cx, Index cy) const { return cx >= x0 && cx < x1 && cy >= y0 && cy < y1; }
  bool contains(const CellBox& other) const {
    return other.x0 >= x0 && other.x1 <= x1 && other.y0 >= y0 && other.y1 <= y1;
  }
  bool operator==(const CellBox&) const = default;
};

/// A rectangular patch of the uniform lattice of spacing h = 1/n covering
/// [0,1]^2. The full grid is the patch with box [0,n)^2. Nodes and cells are
/// numbered lexicographically (x fastest) inside the patch.
class FineGrid {
 public:
  FineGrid() = default;

  /// Patch of the n x n lattice. Throws InputError if the box is empty or
  /// leaves the lattice.
  FineGrid(Index n, CellBox box);

  Index n() const { return n_; }
  double h() const { return h_; }
  const CellBox& box() const { return box_; }
  Index nx() const { return box_.nx(); }
  Index ny() const { return box_.ny(); }

  Index node_count() const { return (nx() + 1) * (ny() + 1); }
  Index cell_count() const { return nx() * ny(); }

  Index node(Index i, Index j) const { return j * (nx() + 1) + i; }
  Index cell(Index i, Index j) const { return j * nx() + i; }

  /// Coordinates of local node (i, j).
  double x(Index i) const { return static_cast<double>(box_.x0 + i) * h_; }
  double y(Index j) const { return static_cast<double>(box_.y0 + j) * h_; }

  /// Counterclockwise corner nodes of local cell (i, j): (0,0),(1,0),(1,1),(0,1).
  std::array<Index, 4> cell_nodes(Index i, Index j) const {
    const Index base = node(i, j);
    return {base, base + 1, base + nx() + 2, base + nx() + 1};
  }

  /// Nodes of this patch lying on the boundary of the unit square.
  bool is_domain_boundary(Index i, Index j) const {
    const Index gi = box_.x0 + i;
    const Index gj = box_.y0 + j;
    return gi == 0 || gj == 0 || gi == n_ || gj == n_;
  }
  const std::vector<Index>& boundary_nodes() const { return boundary_; }

  /// Global cell index (in the full n x n lattice) of local cell (i, j).
  Index global_cell(Index i, Index j) const { return (box_.y0 + j) * n_ + (box_.x0 + i); }
  /// Global node index (in the full lattice) of local node (i, j).
  Index global_node(Index i, Index j) const { return (box_.y0 + j) * (n_ + 1) + (box_.x0 + i); }

  FineGrid patch(const CellBox& sub) const { return FineGrid(n_, sub); }

 private:
  Index n_ = 0;
  double h_ = 0.0;
  CellBox box_;
  std::vector<Index> boundary_;
};

FineGrid build_fine_grid(Index n);

/// Coarse partition of the unit square into Hinv x Hinv blocks aligned with
/// the fine grid, with oversampled neighbourhoods of k_os block layers.
class CoarsePartition {
 public:
  CoarsePartition() = default;
  CoarsePartition(const FineGrid& grid, Index hinv, Index oversampling);

  Index hinv() const { return hinv_; }
  double H() const { return 1.0 / static_cast<double>(hinv_); }
  Index oversampling() const { return oversampling_; }
  Index fine_n() const { return fine_n_; }
  Index cells_per_block() const { return fine_n_ / hinv_; }
  Index block_count() const { return hinv_ * hinv_; }
  /// Shift of the partition. Always zero here; kept for completeness.
  const std::array<double, 2>& offset() const { return offset_; }

  Index block(Index bx, Index by) const { return by * hinv_ + bx; }
  Index block_x(Index b) const { return b % hinv_; }
  Index block_y(Index b) const { return b / hinv_; }

  CellBox cells(Index b) const;
  Index block_of_cell(Index cx, Index cy) const {
    return block(cx / cells_per_block(), cy / cells_per_block());
  }

  /// Blocks (bx +- k) x (by +- k) clipped to the domain.
  CellBox oversampled(Index b) const { return oversampled(b, oversampling_); }
  CellBox oversampled(Index b, Index layers) const;
  std::vector<Index> blocks_in(const CellBox& box) const;

  double block_area() const { return H() * H(); }
  std::array<double, 2> centroid(Index b) const {
    return {(static_cast<double>(block_x(b)) + 0.5) * H(), (static_cast<double>(block_y(b)) + 0.5) * H()};
  }

  /// Coarse nodes: (hinv+1)^2, lexicographic.
  Index coarse_node_count() const { return (hinv_ + 1) * (hinv_ + 1); }
  Index coarse_node(Index i, Index j) const { return j * (hinv_ + 1) + i; }
  std::array<Index, 4> block_nodes(Index b) const {
    const Index base = coarse_node(block_x(b), block_y(b));
    return {base, base + 1, base + hinv_ + 2, base + hinv_ + 1};
  }
  bool is_boundary_coarse_node(Index node) const {
    const Index i = node % (hinv_ + 1);
    const Index j = node / (hinv_ + 1);
    return i == 0 || j == 0 || i == hinv_ || j == hinv_;
  }

 private:
  Index hinv_ = 0;
  Index oversampling_ = 0;
  Index fine_n_ = 0;
  std::array<double, 2> offset_{0.0, 0.0};
};

CoarsePartition build_coarse_partition(const FineGrid& grid, Index hinv, Index oversampling);

/// Per-cell continuum label, 0 or 1, row-major from y = 0.
class ContinuumMap {
 public:
  ContinuumMap() = default;
  ContinuumMap(Index n, std::vector<std::uint8_t> labels);

  Index n() const { return n_; }
  std::uint8_t operator()(Index cx, Index cy) const { return labels_[static_cast<std::size_t>(cy * n_ + cx)]; }
  std::uint8_t at(Index cell) const { return labels_[static_cast<std::size_t>(cell)]; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  Index count(std::uint8_t label) const;
  bool operator==(const ContinuumMap&) const = default;

 private:
  Index n_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// A p x p unit-cell pattern: label 0 on a centred square inclusion of side
/// roughly p/2, label 1 elsewhere. This is the "periodic-bars" medium cell.
std::vector<std::uint8_t> centered_square_pattern(Index cells_per_period);

/// Tiles `pattern` (p x p, row-major) eps_inv times per side over the grid.
ContinuumMap build_periodic_medium(const FineGrid& grid, Index eps_inv, std::span<const std::uint8_t> pattern);

/// Deterministic non-periodic medium: a label-1 background with label-0
/// channels and one isolated inclusion in every 5 x 5 cell tile.
ContinuumMap build_nonperiodic_demo(Index n);

void write_medium(std::ostream& os, const ContinuumMap& map);
ContinuumMap read_medium(std::istream& is);
void save_medium(const ContinuumMap& map, const std::filesystem::path& path);
ContinuumMap load_medium(const std::filesystem::path& path);
/// Loads and checks the declared resolution against `grid`.
ContinuumMap load_medium(const std::filesystem::path& path, const FineGrid& grid);

/// Piecewise-constant positive conductivity per fine cell.
class PermeabilityField {
 public:
  PermeabilityField() = default;
  PermeabilityField(Index n, std::vector<double> values);

  Index n() const { return n_; }
  double operator()(Index cx, Index cy) const { return values_[static_cast<std::size_t>(cy * n_ + cx)]; }
  double at(Index cell) const { return values_[static_cast<std::size_t>(cell)]; }
  std::span<const double> values() const { return values_; }
  double min() const { return min_; }
  double max() const { return max_; }

  /// Cell values restricted to a patch, in the patch's local cell order.
  std::vector<double> restrict_to(const FineGrid& patch) const;

 private:
  Index n_ = 0;
  std::vector<double> values_;
  double min_ = 0.0;
  double max_ = 0.0;
};

/// kappa = eps / 1e5 on label 0, kappa = 1 / (100 eps) on label 1.
PermeabilityField kappa_from_continuum(const ContinuumMap& map, double eps);

}  // namespace fracmc
