#pragma once

// Bilinear (Q1) finite elements on a FineGrid patch: stiffness, mass and load
// assembly, Dirichlet handling and plain-text debug dumps.

#include "fracmc/common.hpp"
#include "fracmc/grid.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

namespace fracmc {

/// Element stiffness of a Q1 square with unit conductivity. Independent of h
/// in two dimensions. Corner order is counterclockwise from (0,0).
template <typename Scalar = double>
Eigen::Matrix<Scalar, 4, 4> q1_reference_stiffness() {
  Eigen::Matrix<Scalar, 4, 4> k;
  k << 4, -1, -2, -1,
      -1, 4, -1, -2,
      -2, -1, 4, -1,
      -1, -2, -1, 4;
  return k / Scalar(6);
}

/// Element mass of a Q1 square of side h.
template <typename Scalar = double>
Eigen::Matrix<Scalar, 4, 4> q1_reference_mass(Scalar h) {
  Eigen::Matrix<Scalar, 4, 4> m;
  m << 4, 2, 1, 2,
       2, 4, 2, 1,
       1, 2, 4, 2,
       2, 1, 2, 4;
  return m * (h * h / Scalar(36));
}

namespace detail {

template <typename Scalar>
SparseMatrix<Scalar> assemble_cellwise(const FineGrid& grid, std::span<const Scalar> weight,
                                       const Eigen::Matrix<Scalar, 4, 4>& element) {
  if (static_cast<Index>(weight.size()) != grid.cell_count())
    throw InputError("assembly: expected one coefficient per cell (" + std::to_string(grid.cell_count()) +
                     "), got " + std::to_string(weight.size()));
  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(16 * grid.cell_count()));
  // Triplets are pushed in cell order; setFromTriplets sums duplicates in that order.
  for (Index j = 0; j < grid.ny(); ++j) {
    for (Index i = 0; i < grid.nx(); ++i) {
      const Scalar w = weight[static_cast<std::size_t>(grid.cell(i, j))];
      const auto nodes = grid.cell_nodes(i, j);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) triplets.emplace_back(nodes[a], nodes[b], w * element(a, b));
    }
  }
  SparseMatrix<Scalar> out(grid.node_count(), grid.node_count());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

}  // namespace detail

/// Stiffness matrix of a(u, v) = sum over cells of kappa_cell * int grad u . grad v.
template <typename Scalar>
SparseMatrix<Scalar> assemble_stiffness(const FineGrid& grid, std::span<const Scalar> kappa) {
  return detail::assemble_cellwise<Scalar>(grid, kappa, q1_reference_stiffness<Scalar>());
}

inline SparseMatrix<double> assemble_stiffness(const FineGrid& grid, const PermeabilityField& kappa) {
  if (grid.n() != kappa.n()) throw InputError("assemble_stiffness: grid and field resolutions differ");
  const auto local = kappa.restrict_to(grid);
  return assemble_stiffness<double>(grid, std::span<const double>(local));
}

/// Weighted mass matrix, weight piecewise constant per cell.
template <typename Scalar>
SparseMatrix<Scalar> assemble_mass(const FineGrid& grid, std::span<const Scalar> weight) {
  return detail::assemble_cellwise<Scalar>(grid, weight, q1_reference_mass<Scalar>(Scalar(grid.h())));
}

template <typename Scalar = double>
SparseMatrix<Scalar> assemble_mass(const FineGrid& grid) {
  const std::vector<Scalar> ones(static_cast<std::size_t>(grid.cell_count()), Scalar(1));
  return assemble_mass<Scalar>(grid, std::span<const Scalar>(ones));
}

/// Two-point Gauss abscissae on [0, 1].
inline constexpr std::array<double, 2> kGauss01{0.21132486540518711775, 0.78867513459481288225};

/// Load vector int f N_p, 2 x 2 Gauss per cell. `f` is called as f(x, y).
template <typename Scalar = double, typename F>
Vector<Scalar> assemble_load(const FineGrid& grid, F&& f) {
  Vector<Scalar> b = Vector<Scalar>::Zero(grid.node_count());
  const Scalar h = Scalar(grid.h());
  const Scalar w = h * h / Scalar(4);
  for (Index j = 0; j < grid.ny(); ++j) {
    for (Index i = 0; i < grid.nx(); ++i) {
      const auto nodes = grid.cell_nodes(i, j);
      for (double gy : kGauss01) {
        for (double gx : kGauss01) {
          const Scalar fv = Scalar(f(grid.x(i) + gx * grid.h(), grid.y(j) + gy * grid.h())) * w;
          const Scalar sx = Scalar(gx), sy = Scalar(gy);
          b[nodes[0]] += fv * (1 - sx) * (1 - sy);
          b[nodes[1]] += fv * sx * (1 - sy);
          b[nodes[2]] += fv * sx * sy;
          b[nodes[3]] += fv * (1 - sx) * sy;
        }
      }
    }
  }
  return b;
}

/// Replaces boundary rows and columns by the identity and zeroes the boundary
/// entries of b. Keeps the system symmetric.
template <typename Scalar>
std::pair<SparseMatrix<Scalar>, Vector<Scalar>> apply_dirichlet(const SparseMatrix<Scalar>& A,
                                                               const Vector<Scalar>& b,
                                                               std::span<const Index> boundary) {
  if (A.rows() != A.cols() || A.rows() != b.size()) throw InputError("apply_dirichlet: size mismatch");
  std::vector<char> fixed(static_cast<std::size_t>(A.rows()), 0);
  for (Index p : boundary) {
    if (p < 0 || p >= A.rows()) throw InputError("apply_dirichlet: boundary node out of range");
    fixed[static_cast<std::size_t>(p)] = 1;
  }
  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(A.nonZeros()));
  for (Index k = 0; k < A.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(A, k); it; ++it)
      if (!fixed[static_cast<std::size_t>(it.row())] && !fixed[static_cast<std::size_t>(it.col())])
        triplets.emplace_back(it.row(), it.col(), it.value());
  for (Index p = 0; p < A.rows(); ++p)
    if (fixed[static_cast<std::size_t>(p)]) triplets.emplace_back(p, p, Scalar(1));
  SparseMatrix<Scalar> out(A.rows(), A.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  Vector<Scalar> rhs = b;
  for (Index p = 0; p < A.rows(); ++p)
    if (fixed[static_cast<std::size_t>(p)]) rhs[p] = Scalar(0);
  return {std::move(out), std::move(rhs)};
}

/// Index map keeping every node that is not on the boundary of the unit
/// square; -1 marks eliminated nodes.
struct InteriorMap {
  std::vector<Index> to_reduced;
  std::vector<Index> to_full;

  Index size() const { return static_cast<Index>(to_full.size()); }

  template <typename Scalar>
  SparseMatrix<Scalar> restrict_matrix(const SparseMatrix<Scalar>& A) const {
    std::vector<Eigen::Triplet<Scalar>> triplets;
    for (Index k = 0; k < A.outerSize(); ++k)
      for (typename SparseMatrix<Scalar>::InnerIterator it(A, k); it; ++it) {
        const Index r = to_reduced[static_cast<std::size_t>(it.row())];
        const Index c = to_reduced[static_cast<std::size_t>(it.col())];
        if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
      }
    SparseMatrix<Scalar> out(size(), size());
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
  }

  template <typename Scalar>
  Vector<Scalar> restrict_vector(const Vector<Scalar>& v) const {
    Vector<Scalar> out(size());
    for (Index r = 0; r < size(); ++r) out[r] = v[to_full[static_cast<std::size_t>(r)]];
    return out;
  }

  template <typename Scalar>
  Vector<Scalar> extend(const Vector<Scalar>& v) const {
    Vector<Scalar> out = Vector<Scalar>::Zero(static_cast<Index>(to_reduced.size()));
    for (Index r = 0; r < size(); ++r) out[to_full[static_cast<std::size_t>(r)]] = v[r];
    return out;
  }
};

inline InteriorMap interior_map(const FineGrid& grid) {
  InteriorMap map;
  map.to_reduced.assign(static_cast<std::size_t>(grid.node_count()), -1);
  for (Index j = 0; j <= grid.ny(); ++j)
    for (Index i = 0; i <= grid.nx(); ++i)
      if (!grid.is_domain_boundary(i, j)) {
        map.to_reduced[static_cast<std::size_t>(grid.node(i, j))] = map.size();
        map.to_full.push_back(grid.node(i, j));
      }
  return map;
}

/// Nodal interpolation of f(x, y).
template <typename Scalar = double, typename F>
Vector<Scalar> interpolate(const FineGrid& grid, F&& f) {
  Vector<Scalar> v(grid.node_count());
  for (Index j = 0; j <= grid.ny(); ++j)
    for (Index i = 0; i <= grid.nx(); ++i) v[grid.node(i, j)] = Scalar(f(grid.x(i), grid.y(j)));
  return v;
}

/// Value of a nodal field at every cell midpoint (mean of the four corners).
template <typename Scalar>
Vector<Scalar> cell_midpoints(const FineGrid& grid, const Vector<Scalar>& nodal) {
  if (nodal.size() != grid.node_count()) throw InputError("cell_midpoints: size mismatch");
  Vector<Scalar> out(grid.cell_count());
  for (Index j = 0; j < grid.ny(); ++j)
    for (Index i = 0; i < grid.nx(); ++i) {
      const auto c = grid.cell_nodes(i, j);
      out[grid.cell(i, j)] = (nodal[c[0]] + nodal[c[1]] + nodal[c[2]] + nodal[c[3]]) / Scalar(4);
    }
  return out;
}

/// Debug dump: one `i j value` line per stored entry, column-major order.
template <typename Scalar>
void write_triplets(std::ostream& os, const SparseMatrix<Scalar>& A) {
  os << std::setprecision(17);
  for (Index k = 0; k < A.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(A, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

template <typename Scalar>
void write_vector(std::ostream& os, const Vector<Scalar>& v) {
  os << std::setprecision(17);
  for (Index i = 0; i < v.size(); ++i) os << v[i] << '\n';
}

}  // namespace fracmc
