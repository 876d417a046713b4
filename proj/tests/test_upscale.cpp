#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fracmc/fem.hpp"
#include "fracmc/upscale.hpp"

#include <cmath>
#include <sstream>

using namespace fracmc;

namespace {

struct Setup {
  FineGrid grid;
  ContinuumMap map;
  PermeabilityField kappa;
  CoarsePartition partition;
};

Setup periodic(Index n, Index eps_inv, Index hinv, Index layers = 1) {
  Setup s;
  s.grid = build_fine_grid(n);
  s.map = build_periodic_medium(s.grid, eps_inv, centered_square_pattern(n / eps_inv));
  s.kappa = kappa_from_continuum(s.map, 1.0 / static_cast<double>(eps_inv));
  s.partition = CoarsePartition(s.grid, hinv, layers);
  return s;
}

Setup homogeneous(Index n, Index hinv, Index layers = 1) {
  Setup s;
  s.grid = build_fine_grid(n);
  s.map = ContinuumMap(n, std::vector<std::uint8_t>(static_cast<std::size_t>(n * n), 1));
  s.kappa = kappa_from_continuum(s.map, 0.1);
  s.partition = CoarsePartition(s.grid, hinv, layers);
  return s;
}

// int_K kappa grad u . grad v by an explicit loop over the cells of K.
double block_energy(const CellBasis& basis, const PermeabilityField& kappa, const Vector<double>& u,
                    const Vector<double>& v) {
  const auto k = q1_reference_stiffness<double>();
  const FineGrid& p = basis.patch;
  double sum = 0.0;
  for (Index cy = basis.target.y0; cy < basis.target.y1; ++cy)
    for (Index cx = basis.target.x0; cx < basis.target.x1; ++cx) {
      const auto c = p.cell_nodes(cx - p.box().x0, cy - p.box().y0);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) sum += kappa(cx, cy) * u[c[a]] * k(a, b) * v[c[b]];
    }
  return sum;
}

bool patch_touches_boundary(const CellBasis& b) {
  const auto& box = b.patch.box();
  const Index n = b.patch.n();
  return box.x0 == 0 || box.y0 == 0 || box.x1 == n || box.y1 == n;
}

}  // namespace

TEST_CASE("cell problems satisfy their constraints") {
  const Setup s = periodic(40, 10, 4);
  for (Index b = 0; b < s.partition.block_count(); ++b) {
    const CellBasis basis = solve_cell_problems(b, s.partition, s.map, s.kappa);
    CHECK(basis.constraint_residual <= 1e-9);
    CHECK(basis.present[0]);
    CHECK(basis.present[1]);
    CHECK(basis.multipliers.cols() == 6);
    CHECK(static_cast<Index>(basis.constraints.size()) ==
          2 * static_cast<Index>(s.partition.blocks_in(basis.patch.box()).size()));
  }
}

TEST_CASE("continuum basis functions are a partition of unity away from the boundary") {
  const Setup s = periodic(80, 10, 8);
  const CellBasis basis = solve_cell_problems(s.partition.block(3, 4), s.partition, s.map, s.kappa);
  REQUIRE_FALSE(patch_touches_boundary(basis));
  const Vector<double> sum = basis.phi[0] + basis.phi[1];
  CHECK((sum.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("homogeneous single continuum") {
  // One oversampling ring leaves alpha_hat about 45% above kappa; three rings
  // bring it within a few percent.
  const Setup s = homogeneous(100, 10, 3);
  const Upscaling up = upscale(s.partition, s.map, s.kappa, 0.1);
  int interior = 0;
  for (Index b = 0; b < s.partition.block_count(); ++b) {
    const auto& basis = up.bases[static_cast<std::size_t>(b)];
    const auto& eb = up.blocks[static_cast<std::size_t>(b)];
    CHECK_FALSE(eb.present[0]);
    CHECK(basis.phi[0].cwiseAbs().maxCoeff() == 0.0);
    if (patch_touches_boundary(basis)) continue;
    ++interior;
    CHECK((basis.phi[1].array() - 1.0).abs().maxCoeff() < 1e-9);
    CHECK(std::abs(eb.gamma_hat[1][1]) < 1e-9);
    CHECK(std::abs(eb.beta_hat[1][1][0]) < 1e-9);
    CHECK(std::abs(eb.beta_hat[1][1][1]) < 1e-9);
    CHECK(eb.mass_hat[1][1] == doctest::Approx(1.0).epsilon(1e-9));
    for (int m = 0; m < 2; ++m)
      for (int n = 0; n < 2; ++n) {
        const double target = m == n ? 0.1 : 0.0;
        CHECK(std::abs(eb.alpha_hat[1][1][m][n] - target) <= 0.1 * 0.1);
      }
  }
  CHECK(interior == 4);
}

TEST_CASE("homogeneous alpha_hat with one oversampling ring") {
  const Setup s = homogeneous(48, 6);
  const CellBasis basis = solve_cell_problems(s.partition.block(2, 2), s.partition, s.map, s.kappa);
  REQUIRE_FALSE(patch_touches_boundary(basis));
  const auto eb = effective_coeffs(basis, s.kappa, 0.1);
  CHECK(eb.alpha_hat[1][1][0][0] == doctest::Approx(0.14445).epsilon(2e-3));
  CHECK(eb.alpha_hat[1][1][1][1] == doctest::Approx(0.14445).epsilon(2e-3));
}

TEST_CASE("effective coefficients against independent block integrals") {
  const Setup s = periodic(40, 10, 4);
  const CellBasis basis = solve_cell_problems(s.partition.block(2, 1), s.partition, s.map, s.kappa);
  const EffectiveBlock eb = effective_coeffs(basis, s.kappa, 0.1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double g = block_energy(basis, s.kappa, basis.phi[i], basis.phi[j]);
      CHECK(std::abs(eb.gamma[i][j] - g) <= 1e-10 * std::abs(g));
      for (int m = 0; m < 2; ++m) {
        const double beta = block_energy(basis, s.kappa, basis.phi_grad[i][m], basis.phi[j]);
        CHECK(std::abs(eb.beta[i][j][m] - beta) <= 1e-10 * std::max(std::abs(beta), 1e-12));
        for (int n = 0; n < 2; ++n) {
          const double a = block_energy(basis, s.kappa, basis.phi_grad[i][m], basis.phi_grad[j][n]);
          CHECK(std::abs(eb.alpha[i][j][m][n] - a) <= 1e-10 * std::max(std::abs(a), 1e-12));
        }
      }
    }
  // Symmetries of the bilinear forms.
  CHECK(eb.gamma[0][1] == eb.gamma[1][0]);
  CHECK(eb.alpha[0][1][0][1] == eb.alpha[1][0][1][0]);
  // Row sums of the coupling vanish: phi_0 + phi_1 is constant on this patch.
  if (!patch_touches_boundary(basis)) CHECK(std::abs(eb.gamma[0][0] + eb.gamma[0][1]) < 1e-8 * eb.gamma[0][0]);
  CHECK(eb.mass[0][0] > 0.0);
  CHECK(eb.gamma_hat[0][1] == doctest::Approx(0.01 * eb.gamma[0][1] / eb.area));
}

TEST_CASE("upscaling is deterministic and independent of the schedule") {
  const Setup s = periodic(40, 10, 4);
  const Upscaling a = upscale(s.partition, s.map, s.kappa, 0.1);
  const Upscaling b = upscale(s.partition, s.map, s.kappa, 0.1);
  std::ostringstream oa, ob;
  write_effective(oa, a.blocks);
  write_effective(ob, b.blocks);
  CHECK(oa.str() == ob.str());
  const CellBasis direct = solve_cell_problems(5, s.partition, s.map, s.kappa);
  CHECK((direct.phi[1] - a.bases[5].phi[1]).norm() == 0.0);
}

TEST_CASE("coarse model") {
  const Setup s = periodic(40, 10, 4);
  const Upscaling up = upscale(s.partition, s.map, s.kappa, 0.1);
  CoarseModel model = assemble_coarse(s.partition, up.blocks);
  CHECK(model.size == 2 * 9);
  CHECK(asymmetry(model.stiffness) < 1e-14);
  CHECK(asymmetry(model.mass) < 1e-14);
  const auto& eig = model.eigen();
  CHECK(eig.values.minCoeff() >= 0.0);
  CHECK(Matrix<double>(model.mass).ldlt().isPositive());

  // Interpolation and centre sampling of a bilinear function are exact.
  const Vector<double> U = model.interpolate([](double x, double y) { return x * y; });
  const Index b = s.partition.block(1, 2);
  CHECK(model.block_center_value(U, 0, b) == doctest::Approx(0.375 * 0.625));
  CHECK(model.nodal(U, 1)[s.partition.coarse_node(0, 2)] == 0.0);
  CHECK_THROWS_AS(assemble_coarse(s.partition, {}), InputError);
}

TEST_CASE("coarse load and downscaling") {
  const Setup s = periodic(80, 10, 8);
  const Upscaling up = upscale(s.partition, s.map, s.kappa, 0.1);
  const CoarseModel model = assemble_coarse(s.partition, up.blocks);
  const Vector<double> F = assemble_coarse_load(model, up.bases, [](double, double) { return 1.0; });
  // Interior node surrounded by interior blocks: each block contributes int_K phi_j / 4.
  const Index p = s.partition.coarse_node(4, 4);
  double expected = 0.0;
  for (Index b : {s.partition.block(3, 3), s.partition.block(4, 3), s.partition.block(3, 4), s.partition.block(4, 4)})
    expected += up.blocks[static_cast<std::size_t>(b)].mass[0][0] + up.blocks[static_cast<std::size_t>(b)].mass[0][1];
  CHECK(F[model.dof[0][static_cast<std::size_t>(p)]] == doctest::Approx(expected / 4.0).epsilon(1e-10));

  // A constant state reconstructs to the constant inside blocks whose patch avoids the boundary.
  const Vector<double> U = Vector<double>::Constant(model.size, 2.0);
  const Vector<double> fine = downscale(model, U, up.bases);
  const CellBasis& basis = up.bases[static_cast<std::size_t>(s.partition.block(3, 3))];
  REQUIRE_FALSE(patch_touches_boundary(basis));
  for (Index cy = basis.target.y0; cy < basis.target.y1; ++cy)
    for (Index cx = basis.target.x0; cx < basis.target.x1; ++cx) CHECK(fine[cy * 80 + cx] == doctest::Approx(2.0));
}

TEST_CASE("constraint tolerance is enforced") {
  const Setup s = periodic(40, 10, 4);
  CellProblemOptions strict;
  strict.constraint_tol = 0.0;
  const CellBasis basis = solve_cell_problems(0, s.partition, s.map, s.kappa);
  if (basis.constraint_residual > 0.0) CHECK_THROWS_AS(solve_cell_problems(0, s.partition, s.map, s.kappa, strict), NumericalError);
  CHECK_THROWS_AS(solve_cell_problems(99, s.partition, s.map, s.kappa), InputError);
}
