#include "fracmc/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fracmc {

Vector<double> solve_spd(const SparseMatrix<double>& A, const Vector<double>& b, double tol, Index max_iterations) {
  if (A.rows() != A.cols() || A.rows() != b.size()) throw InputError("solve_spd: size mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector<double>::Zero(b.size());
  Eigen::ConjugateGradient<SparseMatrix<double>, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(max_iterations > 0 ? max_iterations : std::max<Index>(1000, 10 * A.rows()));
  cg.compute(A);
  Vector<double> x = cg.solve(b);
  const double residual = (A * x - b).norm() / bnorm;
  if (cg.info() != Eigen::Success || !(residual <= tol)) {
    std::ostringstream msg;
    msg << "solve_spd: no convergence after " << cg.iterations() << " iterations, relative residual " << residual;
    throw NumericalError(msg.str());
  }
  return x;
}

SpdFactorization::SpdFactorization(const SparseMatrix<double>& A) : size_(A.rows()) {
  if (A.rows() != A.cols()) throw InputError("SpdFactorization: matrix not square");
  ldlt_.compute(A);
  if (ldlt_.info() != Eigen::Success) throw NumericalError("SpdFactorization: factorization failed");
  if ((ldlt_.vectorD().array() <= 0.0).any()) throw NumericalError("SpdFactorization: matrix is not positive definite");
}

Vector<double> SpdFactorization::solve(const Vector<double>& b) const {
  if (b.size() != size_) throw InputError("SpdFactorization::solve: size mismatch");
  return ldlt_.solve(b);
}

std::vector<Index> dependent_rows(const SparseMatrix<double>& constraints, double rel_tol) {
  const Matrix<double> ct = Matrix<double>(constraints).transpose();
  std::vector<Index> dependent;
  if (ct.cols() == 0) return dependent;
  // Greedy Gram-Schmidt in row order names the later row of each dependent set.
  Matrix<double> basis(ct.rows(), 0);
  const double scale = std::max(ct.norm(), 1e-300);
  for (Index r = 0; r < ct.cols(); ++r) {
    Vector<double> v = ct.col(r);
    for (int pass = 0; pass < 2; ++pass)
      if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
    if (v.norm() <= rel_tol * std::max(ct.col(r).norm(), rel_tol * scale)) {
      dependent.push_back(r);
    } else {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = v / v.norm();
    }
  }
  return dependent;
}

ConstrainedSolver::ConstrainedSolver(const SparseMatrix<double>& energy, const SparseMatrix<double>& constraints)
    : n_(energy.rows()), m_(constraints.rows()), energy_(energy), constraints_(constraints) {
  if (energy.rows() != energy.cols() || constraints.cols() != n_)
    throw InputError("solve_constrained: size mismatch between energy and constraint matrices");
  if (m_ <= 512) {
    const auto dep = dependent_rows(constraints);
    if (!dep.empty()) {
      std::ostringstream msg;
      msg << "solve_constrained: rank-deficient constraints, dependent rows:";
      for (Index r : dep) msg << ' ' << r;
      throw NumericalError(msg.str());
    }
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(energy.nonZeros() + 2 * constraints.nonZeros()));
  for (Index k = 0; k < energy.outerSize(); ++k)
    for (SparseMatrix<double>::InnerIterator it(energy, k); it; ++it) triplets.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < constraints.outerSize(); ++k)
    for (SparseMatrix<double>::InnerIterator it(constraints, k); it; ++it) {
      triplets.emplace_back(n_ + it.row(), it.col(), it.value());
      triplets.emplace_back(it.col(), n_ + it.row(), it.value());
    }
  SparseMatrix<double> kkt(n_ + m_, n_ + m_);
  kkt.setFromTriplets(triplets.begin(), triplets.end());
  kkt.makeCompressed();
  lu_.analyzePattern(kkt);
  lu_.factorize(kkt);
  if (lu_.info() != Eigen::Success)
    throw NumericalError("solve_constrained: KKT factorization failed (" + lu_.lastErrorMessage() + ")");
}

ConstrainedSolution ConstrainedSolver::solve(const Vector<double>& g) const {
  if (g.size() != m_) throw InputError("solve_constrained: constraint values have wrong size");
  Vector<double> rhs = Vector<double>::Zero(n_ + m_);
  rhs.tail(m_) = g;
  Vector<double> sol = lu_.solve(rhs);
  // One step of iterative refinement on the full saddle-point residual.
  Vector<double> x = sol.head(n_);
  Vector<double> d = sol.tail(m_);
  Vector<double> r(n_ + m_);
  r.head(n_) = -(energy_ * x + constraints_.transpose() * d);
  r.tail(m_) = g - constraints_ * x;
  const Vector<double> corr = lu_.solve(r);
  x += corr.head(n_);
  d += corr.tail(m_);
  if (!x.allFinite() || !d.allFinite()) throw NumericalError("solve_constrained: non-finite solution");
  return {std::move(x), std::move(d)};
}

ConstrainedSolution solve_constrained(const SparseMatrix<double>& energy, const SparseMatrix<double>& constraints,
                                      const Vector<double>& g) {
  return ConstrainedSolver(energy, constraints).solve(g);
}

double asymmetry(const SparseMatrix<double>& A) {
  if (A.rows() != A.cols()) return std::numeric_limits<double>::infinity();
  const SparseMatrix<double> diff = A - SparseMatrix<double>(A.transpose());
  const double scale = A.norm();
  return scale > 0.0 ? diff.norm() / scale : diff.norm();
}

Eigendecomposition eig_generalized(const SparseMatrix<double>& A, const SparseMatrix<double>& M) {
  if (A.rows() != A.cols() || M.rows() != M.cols() || A.rows() != M.rows())
    throw InputError("eig_generalized: size mismatch");
  if (asymmetry(A) > 1e-12) throw InputError("eig_generalized: stiffness matrix is not symmetric");
  if (asymmetry(M) > 1e-12) throw InputError("eig_generalized: mass matrix is not symmetric");
  const Matrix<double> a = Matrix<double>(A);
  const Matrix<double> m = Matrix<double>(M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix<double>> solver(a, m, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eig_generalized: eigensolver failed (mass matrix not positive definite?)");
  Eigendecomposition eig{solver.eigenvalues(), solver.eigenvectors(), M};
  const double top = eig.values.size() > 0 ? std::abs(eig.values.maxCoeff()) : 0.0;
  for (Index k = 0; k < eig.values.size(); ++k) {
    if (eig.values[k] < 0.0) {
      if (eig.values[k] < -1e-10 * std::max(top, 1.0)) {
        std::ostringstream msg;
        msg << "eig_generalized: negative eigenvalue " << eig.values[k] << " at index " << k;
        throw NumericalError(msg.str());
      }
      eig.values[k] = 0.0;
    }
  }
  return eig;
}

Vector<double> apply_matrix_function(const std::function<double(double)>& g, const Eigendecomposition& eig,
                                     const Vector<double>& v) {
  if (v.size() != eig.size()) throw InputError("apply_matrix_function: size mismatch");
  Vector<double> c = eig.to_modal(v);
  for (Index k = 0; k < c.size(); ++k) {
    const double gk = g(eig.values[k]);
    if (!std::isfinite(gk)) {
      std::ostringstream msg;
      msg << "apply_matrix_function: g is not finite at eigenvalue " << k << " (lambda = " << eig.values[k] << ")";
      throw NumericalError(msg.str());
    }
    c[k] *= gk;
  }
  return eig.from_modal(c);
}

}  // namespace fracmc
