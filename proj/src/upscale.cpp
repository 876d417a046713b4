#include "fracmc/upscale.hpp"

#include "fracmc/fem.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

namespace fracmc {
namespace {

constexpr int kRhs = 6;

// Right-hand side column of phi_i (m = -1) or phi_i^m.
int rhs_column(int i, int m) { return m < 0 ? i : 2 + 2 * i + m; }

// Mean over the four corners of global cell (cx, cy), i.e. the midpoint value.
double midpoint_value(const FineGrid& patch, const Vector<double>& v, Index cx, Index cy) {
  const auto c = patch.cell_nodes(cx - patch.box().x0, cy - patch.box().y0);
  return 0.25 * (v[c[0]] + v[c[1]] + v[c[2]] + v[c[3]]);
}

// Cell weights on the patch equal to w inside the target box and 0 outside.
std::vector<double> masked_weights(const FineGrid& patch, const CellBox& target, const std::vector<double>& w) {
  std::vector<double> out(w.size(), 0.0);
  for (Index j = 0; j < patch.ny(); ++j)
    for (Index i = 0; i < patch.nx(); ++i)
      if (target.contains(patch.box().x0 + i, patch.box().y0 + j))
        out[static_cast<std::size_t>(patch.cell(i, j))] = w[static_cast<std::size_t>(patch.cell(i, j))];
  return out;
}

}  // namespace

CellBasis solve_cell_problems(Index block, const CoarsePartition& partition, const ContinuumMap& map,
                              const PermeabilityField& kappa, const CellProblemOptions& options) {
  if (block < 0 || block >= partition.block_count())
    throw InputError("solve_cell_problems: block " + std::to_string(block) + " out of range");
  if (map.n() != partition.fine_n() || kappa.n() != partition.fine_n())
    throw InputError("solve_cell_problems: medium resolution differs from the partition");

  CellBasis basis;
  basis.block = block;
  basis.target = partition.cells(block);
  basis.center = partition.centroid(block);
  basis.patch = FineGrid(partition.fine_n(), partition.oversampled(block));
  const FineGrid& patch = basis.patch;
  const double h = patch.h();

  for (Index cy = basis.target.y0; cy < basis.target.y1; ++cy)
    for (Index cx = basis.target.x0; cx < basis.target.x1; ++cx) basis.present[map(cx, cy)] = true;
  if (!basis.present[0] && !basis.present[1])
    throw InputError("solve_cell_problems: block " + std::to_string(block) + " has no continuum");

  const auto local_kappa = kappa.restrict_to(patch);
  const InteriorMap interior = interior_map(patch);
  const SparseMatrix<double> energy =
      interior.restrict_matrix(assemble_stiffness<double>(patch, std::span<const double>(local_kappa)));

  // Constraint rows are normalised to continuum means over K_j cap Omega_k, so
  // the right-hand sides are 1 (phi_i) or the mean of y^m - c^m (phi_i^m).
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<std::array<double, kRhs>> rhs;
  for (Index nb : partition.blocks_in(patch.box())) {
    const CellBox cells = partition.cells(nb);
    for (int k = 0; k < 2; ++k) {
      Index count = 0;
      std::array<double, 2> moment{0.0, 0.0};
      for (Index cy = cells.y0; cy < cells.y1; ++cy)
        for (Index cx = cells.x0; cx < cells.x1; ++cx)
          if (map(cx, cy) == k) {
            ++count;
            moment[0] += (static_cast<double>(cx) + 0.5) * h - basis.center[0];
            moment[1] += (static_cast<double>(cy) + 0.5) * h - basis.center[1];
          }
      if (count == 0) continue;
      const Index row = static_cast<Index>(basis.constraints.size());
      const double w = 0.25 / static_cast<double>(count);
      for (Index cy = cells.y0; cy < cells.y1; ++cy)
        for (Index cx = cells.x0; cx < cells.x1; ++cx) {
          if (map(cx, cy) != k) continue;
          for (Index p : patch.cell_nodes(cx - patch.box().x0, cy - patch.box().y0)) {
            const Index r = interior.to_reduced[static_cast<std::size_t>(p)];
            if (r >= 0) triplets.emplace_back(row, r, w);
          }
        }
      std::array<double, kRhs> g{};
      g[rhs_column(k, -1)] = 1.0;
      g[rhs_column(k, 0)] = moment[0] / static_cast<double>(count);
      g[rhs_column(k, 1)] = moment[1] / static_cast<double>(count);
      rhs.push_back(g);
      basis.constraints.push_back({nb, k});
    }
  }
  const auto m = static_cast<Index>(basis.constraints.size());
  SparseMatrix<double> constraints(m, interior.size());
  constraints.setFromTriplets(triplets.begin(), triplets.end());
  constraints.makeCompressed();

  std::unique_ptr<ConstrainedSolver> solver;
  try {
    solver = std::make_unique<ConstrainedSolver>(energy, constraints);
  } catch (const std::exception& e) {
    throw NumericalError("cell problem for block " + std::to_string(block) + ": " + e.what());
  }

  basis.multipliers.resize(m, kRhs);
  for (int col = 0; col < kRhs; ++col) {
    Vector<double> g(m);
    for (Index r = 0; r < m; ++r) g[r] = rhs[static_cast<std::size_t>(r)][col];
    const ConstrainedSolution sol = solver->solve(g);
    basis.multipliers.col(col) = sol.multipliers;
    const double residual = (constraints * sol.x - g).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff());
    basis.constraint_residual = std::max(basis.constraint_residual, residual);
    Vector<double> field = interior.extend(sol.x);
    if (col < 2) basis.phi[col] = std::move(field);
    else basis.phi_grad[(col - 2) / 2][(col - 2) % 2] = std::move(field);
  }
  if (!(basis.constraint_residual <= options.constraint_tol)) {
    std::ostringstream msg;
    msg << "cell problem for block " << block << ": constraint residual " << basis.constraint_residual
        << " exceeds " << options.constraint_tol;
    throw NumericalError(msg.str());
  }
  return basis;
}

EffectiveBlock effective_coeffs(const CellBasis& basis, const PermeabilityField& kappa, double eps) {
  if (!(eps > 0.0)) throw InputError("effective_coeffs: eps must be positive");
  const FineGrid& patch = basis.patch;
  const auto local_kappa = kappa.restrict_to(patch);
  const std::vector<double> ones(local_kappa.size(), 1.0);
  const auto wk = masked_weights(patch, basis.target, local_kappa);
  const auto wm = masked_weights(patch, basis.target, ones);
  const SparseMatrix<double> S = assemble_stiffness<double>(patch, std::span<const double>(wk));
  const SparseMatrix<double> M = assemble_mass<double>(patch, std::span<const double>(wm));

  EffectiveBlock eb;
  eb.block = basis.block;
  eb.eps = eps;
  eb.present = basis.present;
  eb.area = static_cast<double>(basis.target.cell_count()) * patch.h() * patch.h();

  // Fields indexed 2i + m; each symmetric form is evaluated once per pair.
  std::array<Vector<double>, 4> grads;
  std::array<Vector<double>, 4> s_grads;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < 2; ++m) {
      grads[2 * i + m] = basis.phi_grad[i][m];
      s_grads[2 * i + m] = S * basis.phi_grad[i][m];
    }
  std::array<Vector<double>, 2> s_phi{S * basis.phi[0], S * basis.phi[1]};
  std::array<Vector<double>, 2> m_phi{M * basis.phi[0], M * basis.phi[1]};

  for (int p = 0; p < 4; ++p)
    for (int q = p; q < 4; ++q) {
      const double v = grads[q].dot(s_grads[p]);
      eb.alpha[p / 2][q / 2][p % 2][q % 2] = v;
      eb.alpha[q / 2][p / 2][q % 2][p % 2] = v;
    }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int m = 0; m < 2; ++m) eb.beta[i][j][m] = basis.phi[j].dot(s_grads[2 * i + m]);
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      eb.gamma[i][j] = eb.gamma[j][i] = basis.phi[j].dot(s_phi[i]);
      eb.mass[i][j] = eb.mass[j][i] = basis.phi[j].dot(m_phi[i]);
    }

  const double inv_area = 1.0 / eb.area;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      for (int m = 0; m < 2; ++m) {
        for (int n = 0; n < 2; ++n) eb.alpha_hat[i][j][m][n] = eb.alpha[i][j][m][n] * inv_area;
        eb.beta_hat[i][j][m] = eps * eb.beta[i][j][m] * inv_area;
      }
      eb.gamma_hat[i][j] = eps * eps * eb.gamma[i][j] * inv_area;
      eb.mass_hat[i][j] = eb.mass[i][j] * inv_area;
    }
  return eb;
}

Upscaling upscale(const CoarsePartition& partition, const ContinuumMap& map, const PermeabilityField& kappa,
                  double eps, const CellProblemOptions& options) {
  const Index nb = partition.block_count();
  Upscaling out;
  out.partition = partition;
  out.eps = eps;
  out.bases.resize(static_cast<std::size_t>(nb));
  out.blocks.resize(static_cast<std::size_t>(nb));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nb));

#pragma omp parallel for schedule(dynamic)
  for (Index b = 0; b < nb; ++b) {
    try {
      auto& basis = out.bases[static_cast<std::size_t>(b)];
      basis = solve_cell_problems(b, partition, map, kappa, options);
      out.blocks[static_cast<std::size_t>(b)] = effective_coeffs(basis, kappa, eps);
    } catch (...) {
      errors[static_cast<std::size_t>(b)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace {

// Bilinear shape functions on a coarse square of side H at reference point
// (s, t) in [0, 1]^2, corners counterclockwise.
struct CoarseShape {
  std::array<double, 4> N;
  std::array<std::array<double, 2>, 4> dN;
};

CoarseShape coarse_shape(double s, double t, double H) {
  CoarseShape sh;
  sh.N = {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
  sh.dN = {{{-(1 - t) / H, -(1 - s) / H}, {(1 - t) / H, -s / H}, {t / H, s / H}, {-t / H, (1 - s) / H}}};
  return sh;
}

}  // namespace

const Eigendecomposition& CoarseModel::eigen() {
  if (!eig) eig = eig_generalized(stiffness, mass);
  return *eig;
}

Vector<double> CoarseModel::nodal(const Vector<double>& U, int i) const {
  if (U.size() != size) throw InputError("CoarseModel::nodal: vector has wrong size");
  Vector<double> out = Vector<double>::Zero(partition.coarse_node_count());
  for (Index p = 0; p < out.size(); ++p) {
    const Index d = dof[i][static_cast<std::size_t>(p)];
    if (d >= 0) out[p] = U[d];
  }
  return out;
}

double CoarseModel::block_center_value(const Vector<double>& U, int i, Index b) const {
  double s = 0.0;
  for (Index p : partition.block_nodes(b)) {
    const Index d = dof[i][static_cast<std::size_t>(p)];
    if (d >= 0) s += U[d];
  }
  return 0.25 * s;
}

Vector<double> CoarseModel::interpolate(const std::function<double(double, double)>& g) const {
  Vector<double> out = Vector<double>::Zero(size);
  const Index stride = partition.hinv() + 1;
  for (int i = 0; i < 2; ++i)
    for (Index p = 0; p < partition.coarse_node_count(); ++p) {
      const Index d = dof[i][static_cast<std::size_t>(p)];
      if (d >= 0)
        out[d] = g(static_cast<double>(p % stride) * partition.H(), static_cast<double>(p / stride) * partition.H());
    }
  return out;
}

CoarseModel assemble_coarse(const CoarsePartition& partition, const std::vector<EffectiveBlock>& blocks) {
  if (static_cast<Index>(blocks.size()) != partition.block_count())
    throw InputError("assemble_coarse: expected " + std::to_string(partition.block_count()) +
                     " effective blocks, got " + std::to_string(blocks.size()));
  CoarseModel model;
  model.partition = partition;
  const Index nodes = partition.coarse_node_count();

  // A continuum keeps its DOF at a node if any adjacent block contains it.
  std::array<std::vector<char>, 2> touched{std::vector<char>(nodes, 0), std::vector<char>(nodes, 0)};
  for (Index b = 0; b < partition.block_count(); ++b) {
    const auto& eb = blocks[static_cast<std::size_t>(b)];
    if (eb.block != b) throw InputError("assemble_coarse: effective blocks out of order at " + std::to_string(b));
    for (int i = 0; i < 2; ++i)
      if (eb.present[i])
        for (Index p : partition.block_nodes(b)) touched[i][static_cast<std::size_t>(p)] = 1;
  }
  for (int i = 0; i < 2; ++i) {
    model.dof[i].assign(static_cast<std::size_t>(nodes), -1);
    for (Index p = 0; p < nodes; ++p)
      if (!partition.is_boundary_coarse_node(p) && touched[i][static_cast<std::size_t>(p)])
        model.dof[i][static_cast<std::size_t>(p)] = model.size++;
  }

  const double H = partition.H();
  const double w = H * H / 4.0;
  std::array<CoarseShape, 4> gauss;
  for (int gy = 0; gy < 2; ++gy)
    for (int gx = 0; gx < 2; ++gx) gauss[2 * gy + gx] = coarse_shape(kGauss01[gx], kGauss01[gy], H);

  std::vector<Eigen::Triplet<double>> ta, tm;
  for (Index b = 0; b < partition.block_count(); ++b) {
    const auto& eb = blocks[static_cast<std::size_t>(b)];
    const auto corners = partition.block_nodes(b);
    // Local 8 x 8 matrices, index 4 * continuum + corner.
    Eigen::Matrix<double, 8, 8> ka = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 8> km = Eigen::Matrix<double, 8, 8>::Zero();
    for (const auto& sh : gauss)
      for (int j = 0; j < 2; ++j)
        for (int bn = 0; bn < 4; ++bn)
          for (int i = 0; i < 2; ++i)
            for (int an = 0; an < 4; ++an) {
              double v = 0.0;
              for (int m = 0; m < 2; ++m)
                for (int n = 0; n < 2; ++n) v += eb.alpha_hat[i][j][m][n] * sh.dN[an][m] * sh.dN[bn][n];
              for (int m = 0; m < 2; ++m) {
                v += eb.beta_hat[i][j][m] / eb.eps * sh.dN[an][m] * sh.N[bn];
                v += eb.beta_hat[j][i][m] / eb.eps * sh.N[an] * sh.dN[bn][m];
              }
              v += eb.gamma_hat[i][j] / (eb.eps * eb.eps) * sh.N[an] * sh.N[bn];
              ka(4 * j + bn, 4 * i + an) += w * v;
              km(4 * j + bn, 4 * i + an) += w * eb.mass_hat[i][j] * sh.N[an] * sh.N[bn];
            }
    const Eigen::Matrix<double, 8, 8> ka_sym = 0.5 * (ka + ka.transpose());
    const Eigen::Matrix<double, 8, 8> km_sym = 0.5 * (km + km.transpose());
    for (int r = 0; r < 8; ++r) {
      const Index dr = model.dof[r / 4][static_cast<std::size_t>(corners[r % 4])];
      if (dr < 0) continue;
      for (int c = 0; c < 8; ++c) {
        const Index dc = model.dof[c / 4][static_cast<std::size_t>(corners[c % 4])];
        if (dc < 0) continue;
        ta.emplace_back(dr, dc, ka_sym(r, c));
        tm.emplace_back(dr, dc, km_sym(r, c));
      }
    }
  }
  model.stiffness.resize(model.size, model.size);
  model.stiffness.setFromTriplets(ta.begin(), ta.end());
  model.stiffness.makeCompressed();
  model.mass.resize(model.size, model.size);
  model.mass.setFromTriplets(tm.begin(), tm.end());
  model.mass.makeCompressed();
  return model;
}

Vector<double> assemble_coarse_load(const CoarseModel& model, const std::vector<CellBasis>& bases,
                                    const std::function<double(double, double)>& f) {
  const auto& partition = model.partition;
  if (static_cast<Index>(bases.size()) != partition.block_count())
    throw InputError("assemble_coarse_load: expected one cell basis per block");
  Vector<double> F = Vector<double>::Zero(model.size);
  for (Index b = 0; b < partition.block_count(); ++b) {
    const CellBasis& basis = bases[static_cast<std::size_t>(b)];
    const FineGrid& patch = basis.patch;
    const double h = patch.h();
    const auto corners = partition.block_nodes(b);
    std::array<double, 2> integral{0.0, 0.0};
    for (Index cy = basis.target.y0; cy < basis.target.y1; ++cy)
      for (Index cx = basis.target.x0; cx < basis.target.x1; ++cx) {
        const auto c = patch.cell_nodes(cx - patch.box().x0, cy - patch.box().y0);
        for (double gy : kGauss01)
          for (double gx : kGauss01) {
            const double fv = f((static_cast<double>(cx) + gx) * h, (static_cast<double>(cy) + gy) * h) * h * h / 4.0;
            const std::array<double, 4> N{(1 - gx) * (1 - gy), gx * (1 - gy), gx * gy, (1 - gx) * gy};
            for (int j = 0; j < 2; ++j) {
              double phi = 0.0;
              for (int k = 0; k < 4; ++k) phi += N[k] * basis.phi[j][c[k]];
              integral[j] += fv * phi;
            }
          }
      }
    // (1/|K|) int_K f phi_j times int_K N_p = |K| / 4.
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) {
        const Index d = model.dof[j][static_cast<std::size_t>(corners[k])];
        if (d >= 0) F[d] += integral[j] / 4.0;
      }
  }
  return F;
}

Vector<double> downscale(const CoarseModel& model, const Vector<double>& U, const std::vector<CellBasis>& bases) {
  const auto& partition = model.partition;
  if (U.size() != model.size) throw InputError("downscale: coarse vector has wrong size");
  if (static_cast<Index>(bases.size()) != partition.block_count())
    throw InputError("downscale: expected one cell basis per block");
  const Index n = partition.fine_n();
  const double H = partition.H();
  Vector<double> out = Vector<double>::Zero(n * n);
  std::array<Vector<double>, 2> nodal{model.nodal(U, 0), model.nodal(U, 1)};
  for (Index b = 0; b < partition.block_count(); ++b) {
    const CellBasis& basis = bases[static_cast<std::size_t>(b)];
    const auto c = partition.block_nodes(b);
    std::array<double, 2> value{};
    std::array<std::array<double, 2>, 2> grad{};
    for (int i = 0; i < 2; ++i) {
      const auto& u = nodal[i];
      value[i] = 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]);
      grad[i][0] = ((u[c[1]] - u[c[0]]) + (u[c[2]] - u[c[3]])) / (2.0 * H);
      grad[i][1] = ((u[c[3]] - u[c[0]]) + (u[c[2]] - u[c[1]])) / (2.0 * H);
    }
    for (Index cy = basis.target.y0; cy < basis.target.y1; ++cy)
      for (Index cx = basis.target.x0; cx < basis.target.x1; ++cx) {
        double v = 0.0;
        for (int i = 0; i < 2; ++i) {
          v += midpoint_value(basis.patch, basis.phi[i], cx, cy) * value[i];
          for (int m = 0; m < 2; ++m) v += midpoint_value(basis.patch, basis.phi_grad[i][m], cx, cy) * grad[i][m];
        }
        out[cy * n + cx] = v;
      }
  }
  return out;
}

void write_effective(std::ostream& os, const std::vector<EffectiveBlock>& blocks) {
  os << std::setprecision(17);
  for (const auto& eb : blocks) {
    os << "block " << eb.block << " area " << eb.area << " eps " << eb.eps << " present " << eb.present[0] << ' '
       << eb.present[1] << '\n';
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        os << "  m " << i << j << ' ' << eb.mass[i][j] << " m_hat " << eb.mass_hat[i][j] << '\n';
        os << "  gamma " << i << j << ' ' << eb.gamma[i][j] << " gamma_hat " << eb.gamma_hat[i][j] << '\n';
        for (int m = 0; m < 2; ++m) {
          os << "  beta " << i << j << m + 1 << ' ' << eb.beta[i][j][m] << " beta_hat " << eb.beta_hat[i][j][m]
             << '\n';
          for (int n = 0; n < 2; ++n)
            os << "  alpha " << i << j << m + 1 << n + 1 << ' ' << eb.alpha[i][j][m][n] << " alpha_hat "
               << eb.alpha_hat[i][j][m][n] << '\n';
        }
      }
  }
}

}  // namespace fracmc
