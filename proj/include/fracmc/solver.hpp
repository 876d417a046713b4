#pragma once

// Linear-algebra kernels: SPD solves, KKT solves for constrained energy
// minimisation, the generalized symmetric eigenproblem A q = lambda M q and
// matrix functions built from it.

#include "fracmc/common.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fracmc {

struct SolverTolerances {
  double spd_residual = 1e-10;
  double constraint_residual = 1e-10;
  double eigen_residual = 1e-8;
};

/// Jacobi-preconditioned conjugate gradients. Throws NumericalError with the
/// final relative residual when the iteration cap is hit first.
Vector<double> solve_spd(const SparseMatrix<double>& A, const Vector<double>& b, double tol = 1e-10,
                         Index max_iterations = 0);

/// Sparse Cholesky factorization reused across many right-hand sides.
class SpdFactorization {
 public:
  explicit SpdFactorization(const SparseMatrix<double>& A);
  Vector<double> solve(const Vector<double>& b) const;
  Index size() const { return size_; }

 private:
  Eigen::SimplicialLDLT<SparseMatrix<double>> ldlt_;
  Index size_ = 0;
};

struct ConstrainedSolution {
  Vector<double> x;
  Vector<double> multipliers;
};

/// Factorization of the saddle-point system [E C^T; C 0]. Solutions satisfy
/// E x + C^T d = 0 and C x = g; x minimises x^T E x / 2 subject to C x = g.
class ConstrainedSolver {
 public:
  ConstrainedSolver(const SparseMatrix<double>& energy, const SparseMatrix<double>& constraints);

  ConstrainedSolution solve(const Vector<double>& g) const;
  Index unknowns() const { return n_; }
  Index constraint_count() const { return m_; }

 private:
  Index n_ = 0;
  Index m_ = 0;
  SparseMatrix<double> energy_;
  SparseMatrix<double> constraints_;
  Eigen::SparseLU<SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

/// Indices of constraint rows that are linear combinations of earlier ones.
std::vector<Index> dependent_rows(const SparseMatrix<double>& constraints, double rel_tol = 1e-12);

ConstrainedSolution solve_constrained(const SparseMatrix<double>& energy, const SparseMatrix<double>& constraints,
                                      const Vector<double>& g);

/// Generalized symmetric eigendecomposition with M-orthonormal vectors, so
/// Q^{-1} = Q^T M and M^{-1} A = Q diag(values) Q^T M.
struct Eigendecomposition {
  Vector<double> values;   // ascending, >= 0
  Matrix<double> vectors;  // columns
  SparseMatrix<double> mass;

  Index size() const { return values.size(); }
  /// Modal coordinates Q^T M v.
  Vector<double> to_modal(const Vector<double>& v) const { return vectors.transpose() * (mass * v); }
  Vector<double> from_modal(const Vector<double>& c) const { return vectors * c; }
};

Eigendecomposition eig_generalized(const SparseMatrix<double>& A, const SparseMatrix<double>& M);

/// Q g(Lambda) Q^T M v. Throws NumericalError naming the first eigenvalue
/// index where g is not finite.
Vector<double> apply_matrix_function(const std::function<double(double)>& g, const Eigendecomposition& eig,
                                     const Vector<double>& v);

/// Max relative asymmetry |A - A^T| / |A| of a sparse matrix.
double asymmetry(const SparseMatrix<double>& A);

}  // namespace fracmc
