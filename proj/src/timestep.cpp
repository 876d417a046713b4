#include "fracmc/timestep.hpp"

#include "fracmc/mittag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <sstream>

namespace fracmc {

L1Coeffs l1_coeffs(double alpha, double tau, Index steps) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("l1_coeffs: alpha must lie in (0, 1]");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("l1_coeffs: tau must be positive");
  if (steps < 1) throw InputError("l1_coeffs: at least one step required");
  L1Coeffs c;
  c.alpha = alpha;
  c.tau = tau;
  c.steps = steps;
  c.alpha0 = std::tgamma(2.0 - alpha) * std::pow(tau, alpha);
  c.b.resize(static_cast<std::size_t>(steps) + 1);
  const double p = 1.0 - alpha;
  for (Index j = 0; j <= steps; ++j) {
    const auto x = static_cast<double>(j);
    c.b[static_cast<std::size_t>(j)] = std::pow(x + 1.0, p) - (j == 0 ? 0.0 : std::pow(x, p));
  }
  return c;
}

Source zero_source(Index size) {
  return {[size](double, const Vector<double>&) { return Vector<double>(Vector<double>::Zero(size)); }, false};
}

Source constant_source(Vector<double> load) {
  return {[load = std::move(load)](double, const Vector<double>&) { return load; }, false};
}

Source semilinear_source(SparseMatrix<double> mass, Vector<double> b0) {
  return {[mass = std::move(mass), b0 = std::move(b0)](double, const Vector<double>& U) {
            const Vector<double> r = U - U.cwiseProduct(U).cwiseProduct(U);
            return Vector<double>(mass * r + b0);
          },
          true};
}

Vector<double> semilinear_f(const Vector<double>& U, const Vector<double>& f0) {
  if (U.size() != f0.size()) throw InputError("semilinear_f: size mismatch");
  return U - U.cwiseProduct(U).cwiseProduct(U) + f0;
}

Index Trajectory::first_nonfinite() const {
  for (std::size_t n = 0; n < finite.size(); ++n)
    if (!finite[n]) return static_cast<Index>(n);
  return -1;
}

Trajectory Trajectory::subsample(Index stride) const {
  if (stride < 1) throw InputError("Trajectory::subsample: stride must be >= 1");
  Trajectory out;
  out.method = method;
  out.inner_iterations = inner_iterations;
  for (std::size_t n = 0; n < U.size(); n += static_cast<std::size_t>(stride)) {
    out.t.push_back(t[n]);
    out.U.push_back(U[n]);
    out.finite.push_back(finite[n]);
  }
  return out;
}

namespace {

void check_system(const SparseMatrix<double>& M, const SparseMatrix<double>& A, const Vector<double>& U0) {
  if (M.rows() != M.cols() || A.rows() != A.cols() || M.rows() != A.rows() || U0.size() != M.rows())
    throw InputError("time stepping: M, A and U0 have inconsistent sizes");
}

// (1 - b_1) U^n + sum_{j=1}^{n-1} (b_j - b_{j+1}) U^{n-j} + b_n U^0 for n >= 1,
// U^0 for n = 0. Multiplied by M this is the L1 memory term.
Vector<double> l1_history(const L1Coeffs& c, const std::vector<Vector<double>>& U, Index n) {
  if (n == 0) return U[0];
  const auto& b = c.b;
  Vector<double> h = (1.0 - b[1]) * U[static_cast<std::size_t>(n)];
  for (Index j = 1; j <= n - 1; ++j)
    h += (b[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j + 1)]) * U[static_cast<std::size_t>(n - j)];
  h += b[static_cast<std::size_t>(n)] * U[0];
  return h;
}

Trajectory start(const std::string& method, const Vector<double>& U0, Index steps) {
  Trajectory traj;
  traj.method = method;
  traj.t.reserve(static_cast<std::size_t>(steps) + 1);
  traj.U.reserve(static_cast<std::size_t>(steps) + 1);
  traj.t.push_back(0.0);
  traj.U.push_back(U0);
  traj.finite.push_back(U0.allFinite() ? 1 : 0);
  return traj;
}

void fill_nonfinite(Trajectory& traj, Index from, Index steps, double tau, Index size) {
  const Vector<double> nan = Vector<double>::Constant(size, std::numeric_limits<double>::quiet_NaN());
  for (Index n = from; n <= steps; ++n) {
    traj.t.push_back(static_cast<double>(n) * tau);
    traj.U.push_back(nan);
    traj.finite.push_back(0);
  }
}

}  // namespace

Trajectory l1_implicit_solve(const SparseMatrix<double>& M, const SparseMatrix<double>& A, const Source& f,
                             const Vector<double>& U0, const L1Coeffs& coeffs, const PicardOptions& picard) {
  check_system(M, A, U0);
  const double a0 = coeffs.alpha0;
  const SparseMatrix<double> system = M + a0 * A;
  const SpdFactorization solver(system);
  Trajectory traj = start("l1-implicit", U0, coeffs.steps);

  for (Index n = 0; n < coeffs.steps; ++n) {
    const double t_next = static_cast<double>(n + 1) * coeffs.tau;
    const Vector<double> memory = M * l1_history(coeffs, traj.U, n);
    Vector<double> U = solver.solve(a0 * f.load(t_next, traj.U.back()) + memory);
    if (f.state_dependent) {
      double change = std::numeric_limits<double>::infinity();
      int it = 1;
      for (; it < picard.max_iterations; ++it) {
        Vector<double> next = solver.solve(a0 * f.load(t_next, U) + memory);
        change = (next - U).norm();
        const double scale = next.norm();
        U = std::move(next);
        ++traj.inner_iterations;
        if (change <= picard.tol * scale) break;
      }
      if (!(change <= picard.tol * U.norm())) {
        std::ostringstream msg;
        msg << "l1_implicit_solve: Picard iteration did not converge at step " << n + 1 << " after " << it
            << " iterations (last change " << change << ", |U| " << U.norm() << ")";
        throw NumericalError(msg.str());
      }
    }
    const bool ok = U.allFinite();
    traj.t.push_back(t_next);
    traj.U.push_back(std::move(U));
    traj.finite.push_back(ok ? 1 : 0);
    if (!ok) {
      fill_nonfinite(traj, n + 2, coeffs.steps, coeffs.tau, U0.size());
      break;
    }
  }
  return traj;
}

Trajectory l1_explicit_solve(const SparseMatrix<double>& M, const SparseMatrix<double>& A, const Source& f,
                             const Vector<double>& U0, const L1Coeffs& coeffs) {
  check_system(M, A, U0);
  const double a0 = coeffs.alpha0;
  const SpdFactorization solver(M);
  Trajectory traj = start("l1-explicit", U0, coeffs.steps);
  if (!traj.finite[0]) {
    fill_nonfinite(traj, 1, coeffs.steps, coeffs.tau, U0.size());
    return traj;
  }
  for (Index n = 0; n < coeffs.steps; ++n) {
    const double t = static_cast<double>(n) * coeffs.tau;
    const Vector<double>& Un = traj.U.back();
    const Vector<double> rhs = a0 * (f.load(t, Un) - A * Un) + M * l1_history(coeffs, traj.U, n);
    Vector<double> U = solver.solve(rhs);
    const bool ok = U.allFinite();
    traj.t.push_back(t + coeffs.tau);
    traj.U.push_back(std::move(U));
    traj.finite.push_back(ok ? 1 : 0);
    if (!ok) {
      fill_nonfinite(traj, n + 2, coeffs.steps, coeffs.tau, U0.size());
      break;
    }
  }
  return traj;
}

EIKernels ei_kernels(const Vector<double>& lambda, double alpha, double tau, Index steps) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("ei_kernels: alpha must lie in (0, 1]");
  if (!(tau > 0.0)) throw InputError("ei_kernels: tau must be positive");
  if (steps < 1) throw InputError("ei_kernels: at least one step required");
  const Index dim = lambda.size();
  EIKernels k;
  k.relax.resize(steps + 1, dim);
  k.forced.resize(steps + 1, dim);
  const MLParams p1{alpha, 1.0};
  const MLParams p2{alpha, alpha + 1.0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(dim));

#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < dim; ++i) {
    try {
      k.relax(0, i) = 1.0;
      k.forced(0, i) = 0.0;
      for (Index s = 1; s <= steps; ++s) {
        const double t = static_cast<double>(s) * tau;
        k.relax(s, i) = e_ab(p1, t, lambda[i]);
        k.forced(s, i) = e_ab(p2, t, lambda[i]);
        if (!std::isfinite(k.relax(s, i)) || !std::isfinite(k.forced(s, i))) {
          std::ostringstream msg;
          msg << "ei_kernels: non-finite kernel at step " << s << ", eigenvalue " << i << " (lambda = " << lambda[i]
              << ")";
          throw NumericalError(msg.str());
        }
      }
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return k;
}

Trajectory ei_solve(const Eigendecomposition& eig, const Source& f, const Vector<double>& U0, double alpha,
                    double tau, Index steps) {
  if (U0.size() != eig.size()) throw InputError("ei_solve: initial vector has wrong size");
  const EIKernels k = ei_kernels(eig.values, alpha, tau, steps);
  Trajectory traj = start("ei", U0, steps);
  const Vector<double> c0 = eig.to_modal(U0);
  std::vector<Vector<double>> g;  // g^j = Q^T f^j
  g.reserve(static_cast<std::size_t>(steps));

  for (Index n = 1; n <= steps; ++n) {
    const Index j = n - 1;
    const Vector<double> load = f.load(static_cast<double>(j) * tau, traj.U.back());
    if (!load.allFinite()) {
      fill_nonfinite(traj, n, steps, tau, U0.size());
      break;
    }
    g.push_back(eig.vectors.transpose() * load);

    Vector<double> y = k.relax.row(n).transpose().cwiseProduct(c0) + k.forced.row(n).transpose().cwiseProduct(g[0]);
    for (Index i = 1; i <= n - 1; ++i) {
      const auto& gi = g[static_cast<std::size_t>(i)];
      const auto& gp = g[static_cast<std::size_t>(i - 1)];
      y += k.forced.row(n - i).transpose().cwiseProduct(gi - gp);
    }
    Vector<double> U = eig.from_modal(y);
    const bool ok = U.allFinite();
    traj.t.push_back(static_cast<double>(n) * tau);
    traj.U.push_back(std::move(U));
    traj.finite.push_back(ok ? 1 : 0);
    if (!ok) {
      fill_nonfinite(traj, n + 1, steps, tau, U0.size());
      break;
    }
  }
  return traj;
}

WeightBoundReport ei_weight_bound_check(double alpha, double tau, Index steps, const std::vector<double>& lambdas,
                                        Index first, double allowed_growth) {
  if (first < 1 || first > steps) throw InputError("ei_weight_bound_check: first step outside 1..steps");
  Vector<double> lambda(static_cast<Index>(lambdas.size()));
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0)) throw InputError("ei_weight_bound_check: eigenvalues must be >= 0");
    lambda[static_cast<Index>(i)] = lambdas[i];
  }
  const EIKernels k = ei_kernels(lambda, alpha, tau, steps);
  // W_{n,j} depends on n - j only, so C'(n) is a running maximum over lags.
  const double ta = std::pow(tau, alpha);
  WeightBoundReport rep;
  rep.first = first;
  rep.c_prime.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  double running = 0.0;
  for (Index lag = 1; lag <= steps; ++lag) {
    const double bound = ta * std::pow(static_cast<double>(lag), alpha - 1.0);
    for (Index i = 0; i < lambda.size(); ++i)
      running = std::max(running, std::abs(k.forced(lag, i) - k.forced(lag - 1, i)) / bound);
    rep.c_prime[static_cast<std::size_t>(lag)] = running;
  }
  const double base = rep.c_prime[static_cast<std::size_t>(first)];
  double worst = 0.0;
  for (Index n = first; n <= steps; ++n)
    worst = std::max(worst, rep.c_prime[static_cast<std::size_t>(n)] / base - 1.0);
  rep.growth = worst;
  rep.bounded = std::isfinite(worst) && worst <= allowed_growth;
  return rep;
}

void write_trajectory(std::ostream& os, const Trajectory& traj, bool full_vectors) {
  os << "n,t,flag";
  if (full_vectors && !traj.U.empty())
    for (Index i = 0; i < traj.U[0].size(); ++i) os << ",U_" << i;
  os << '\n';
  char buf[64];
  for (std::size_t n = 0; n < traj.U.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.t[n]);
    os << n << ',' << buf << ',' << (traj.finite[n] ? "ok" : "nonfinite");
    if (full_vectors)
      for (Index i = 0; i < traj.U[n].size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.U[n][i]);
        os << ',' << buf;
      }
    os << '\n';
  }
}

}  // namespace fracmc
