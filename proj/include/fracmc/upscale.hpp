#pragma once

// Multicontinuum upscaling: constrained cell problems on oversampled blocks,
// effective coefficients, the coarse bilinear model for both continua and the
// downscaling reconstruction.

#include "fracmc/common.hpp"
#include "fracmc/grid.hpp"
#include "fracmc/solver.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace fracmc {

/// Cell-problem solutions for one coarse block. Fields are nodal vectors on
/// `patch` (the oversampled region K+), nodes on the boundary of the unit
/// square are zero.
struct CellBasis {
  Index block = -1;
  FineGrid patch;
  CellBox target;                             // K, in global cells
  std::array<double, 2> center{0.0, 0.0};     // c_x, centroid of K
  std::array<bool, 2> present{false, false};  // continuum has cells in K

  std::array<Vector<double>, 2> phi;                    // phi_i
  std::array<std::array<Vector<double>, 2>, 2> phi_grad;  // phi_grad[i][m] = phi_i^m

  /// One row per retained constraint (block, continuum); columns follow the
  /// right-hand sides phi_0, phi_1, phi_0^1, phi_0^2, phi_1^1, phi_1^2.
  std::vector<std::array<Index, 2>> constraints;
  Matrix<double> multipliers;
  double constraint_residual = 0.0;  // max |C x - g| / max(1, |g|)
};

struct CellProblemOptions {
  /// Relative tolerance on the constraint residual, checked after the solve.
  double constraint_tol = 1e-9;
};

CellBasis solve_cell_problems(Index block, const CoarsePartition& partition, const ContinuumMap& map,
                              const PermeabilityField& kappa, const CellProblemOptions& options = {});

/// Effective coefficient tensors of one block, integrated over K only.
/// Index order: alpha[i][j][m][n], beta[i][j][m], gamma[i][j], mass[i][j].
struct EffectiveBlock {
  using T2 = std::array<std::array<double, 2>, 2>;
  using T3 = std::array<T2, 2>;
  using T4 = std::array<T3, 2>;

  Index block = -1;
  double area = 0.0;
  double eps = 0.0;
  std::array<bool, 2> present{false, false};

  T4 alpha{};
  T3 beta{};
  T2 gamma{};
  T2 mass{};

  T4 alpha_hat{};
  T3 beta_hat{};
  T2 gamma_hat{};
  T2 mass_hat{};
};

EffectiveBlock effective_coeffs(const CellBasis& basis, const PermeabilityField& kappa, double eps);

/// Everything the coarse model needs from the fine scale.
struct Upscaling {
  CoarsePartition partition;
  double eps = 0.0;
  std::vector<CellBasis> bases;
  std::vector<EffectiveBlock> blocks;
};

/// Solves all cell problems (in parallel over blocks, results stored by block
/// index so the outcome does not depend on the schedule).
Upscaling upscale(const CoarsePartition& partition, const ContinuumMap& map, const PermeabilityField& kappa,
                  double eps, const CellProblemOptions& options = {});

/// Coarse system M d_t^alpha U + A U = F on the interior coarse nodes of both
/// continua. DOF (i, node) is masked when continuum i has no cells in any
/// block touching the node.
struct CoarseModel {
  CoarsePartition partition;
  std::array<std::vector<Index>, 2> dof;  // dof[i][coarse node] or -1
  Index size = 0;
  SparseMatrix<double> mass;
  SparseMatrix<double> stiffness;
  std::optional<Eigendecomposition> eig;

  const Eigendecomposition& eigen();

  /// Nodal values of continuum i on all coarse nodes (zero on the boundary
  /// and on masked DOFs).
  Vector<double> nodal(const Vector<double>& U, int i) const;
  /// Value of continuum i at the centre of block b (mean of the corners).
  double block_center_value(const Vector<double>& U, int i, Index b) const;
  /// Nodal interpolation of g at the free coarse nodes, same for both continua.
  Vector<double> interpolate(const std::function<double(double, double)>& g) const;
};

CoarseModel assemble_coarse(const CoarsePartition& partition, const std::vector<EffectiveBlock>& blocks);

/// Load of continuum j at coarse node p: sum over blocks K touching p of
/// (1/|K|) int_K f phi_j times int_K N_p.
Vector<double> assemble_coarse_load(const CoarseModel& model, const std::vector<CellBasis>& bases,
                                    const std::function<double(double, double)>& f);

/// Fine reconstruction sum_i phi_i U_i + phi_i^m d_m U_i with U_i and its
/// gradient taken at the block centre; one value per fine cell (midpoint),
/// global row-major order. Discontinuous across block faces.
Vector<double> downscale(const CoarseModel& model, const Vector<double>& U, const std::vector<CellBasis>& bases);

/// Structured text dump of the effective coefficients, one record per block.
void write_effective(std::ostream& os, const std::vector<EffectiveBlock>& blocks);

}  // namespace fracmc
