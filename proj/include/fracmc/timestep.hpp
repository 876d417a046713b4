#pragma once

// Caputo time integrators for M D^alpha U + A U = f(t, U): implicit and
// explicit L1 and the Mittag-Leffler exponential integrator (EI).

#include "fracmc/common.hpp"
#include "fracmc/solver.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace fracmc {

struct L1Coeffs {
  double alpha = 1.0;
  double tau = 0.0;
  Index steps = 0;
  double alpha0 = 0.0;    // Gamma(2 - alpha) tau^alpha
  std::vector<double> b;  // b_j = (j+1)^(1-alpha) - j^(1-alpha), j = 0..steps
};

L1Coeffs l1_coeffs(double alpha, double tau, Index steps);

/// Right-hand side of the semi-discrete system as a load vector. `load` is
/// called with the step time and the current state.
struct Source {
  std::function<Vector<double>(double, const Vector<double>&)> load;
  bool state_dependent = false;
};

Source zero_source(Index size);
Source constant_source(Vector<double> load);
/// Load M (U - U^3) + b0, the semilinear source with a fixed load b0.
Source semilinear_source(SparseMatrix<double> mass, Vector<double> b0);

/// Componentwise U - U^3 + f0.
Vector<double> semilinear_f(const Vector<double>& U, const Vector<double>& f0);

struct PicardOptions {
  double tol = 1e-10;
  int max_iterations = 50;
};

struct Trajectory {
  std::string method;
  std::vector<double> t;
  std::vector<Vector<double>> U;
  std::vector<char> finite;
  Index inner_iterations = 0;

  Index steps() const { return static_cast<Index>(U.size()) - 1; }
  /// First step with a non-finite state, or -1.
  Index first_nonfinite() const;
  /// Keeps every `stride`-th step, starting from step 0.
  Trajectory subsample(Index stride) const;
};

/// (M + a0 A) U^{n+1} = a0 f^{n+1} + M [history]. A state-dependent source is
/// resolved by Picard iteration; failure to converge throws NumericalError
/// naming the step.
Trajectory l1_implicit_solve(const SparseMatrix<double>& M, const SparseMatrix<double>& A, const Source& f,
                             const Vector<double>& U0, const L1Coeffs& coeffs, const PicardOptions& picard = {});

/// M U^{n+1} = a0 (f^n - A U^n) + M [history]. Non-finite states are flagged
/// and every later step is marked non-finite; stepping stops there.
Trajectory l1_explicit_solve(const SparseMatrix<double>& M, const SparseMatrix<double>& A, const Source& f,
                             const Vector<double>& U0, const L1Coeffs& coeffs);

/// e_{a,1}(k tau, lambda) and e_{a,a+1}(k tau, lambda) for k = 0..steps, one
/// row per k and one column per eigenvalue.
struct EIKernels {
  Matrix<double> relax;   // e_{a,1}
  Matrix<double> forced;  // e_{a,a+1}
};

EIKernels ei_kernels(const Vector<double>& lambda, double alpha, double tau, Index steps);

/// Exponential integrator in modal form: with c0 = Q^T M U^0 and g^j = Q^T f^j,
/// U^n = Q [e1(t_n) c0 + e2(t_n) g^0 + sum_{j=1}^{n-1} e2(t_{n-j}) (g^j - g^{j-1})].
/// The source is evaluated at already computed states only.
Trajectory ei_solve(const Eigendecomposition& eig, const Source& f, const Vector<double>& U0, double alpha,
                    double tau, Index steps);

/// Fitted constants C'(n) = max over lambda and j < n of
/// |W_{n,j}| / (tau^alpha (n - j)^(alpha - 1)), W_{n,j} = e2(t_n - t_j) - e2(t_n - t_{j+1}).
struct WeightBoundReport {
  std::vector<double> c_prime;  // index n = 0..steps (c_prime[0] unused)
  Index first = 10;
  double growth = 0.0;  // C'(steps) / C'(first) - 1
  bool bounded = false;
};

WeightBoundReport ei_weight_bound_check(double alpha, double tau, Index steps, const std::vector<double>& lambdas,
                                        Index first = 10, double allowed_growth = 0.05);

/// CSV `n,t,flag[,U_0,...]`, one row per step.
void write_trajectory(std::ostream& os, const Trajectory& traj, bool full_vectors);

}  // namespace fracmc
