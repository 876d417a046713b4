#pragma once

// Two-parameter Mittag-Leffler function E_{a,b}(z) on the real axis
// (z <= 0 is the supported range; small z > 0 is accepted for identities)
// and the relaxation kernel e_{a,b}(t, lambda) = t^(b-1) E_{a,b}(-t^a lambda).

#include "fracmc/common.hpp"

#include <span>
#include <vector>

namespace fracmc {

struct MLParams {
  double alpha = 1.0;  ///< order, 0 < alpha <= 1 (alpha in (1, 2] only through the power series)
  double beta = 1.0;   ///< second parameter, > 0
  double tol = 1e-12;  ///< relative accuracy target

  void validate() const;
};

/// Regime seams. Taylor is tried for |z| <= taylor_max and accepted only when
/// the series is well conditioned; the asymptotic expansion is tried for
/// z <= -asymptotic_min and accepted only when optimal truncation meets the
/// tolerance. Everything else goes through the Laplace-inversion contour.
struct MLRegimes {
  double taylor_max = 5.0;
  double asymptotic_min = 50.0;
};

enum class MLRegime { constant, taylor, asymptotic, contour, exponential };

double ml(const MLParams& params, double z);
MLRegime ml_regime(const MLParams& params, double z);

/// e_{a,b}(t, lambda). t = 0 returns the limit for b >= 1 and throws for b < 1.
double e_ab(const MLParams& params, double t, double lambda);

/// Elementwise ml; a failure is rethrown with the offending index.
std::vector<double> ml_batch(const MLParams& params, std::span<const double> z);

/// 1 / Gamma(x) for any real x (zero at the poles of Gamma).
double rgamma(double x);

namespace detail {

struct SeriesResult {
  double value = 0.0;
  double magnitude = 0.0;  ///< sum of |terms| (Taylor) or last used |term| (asymptotic)
  bool accepted = false;
};

SeriesResult ml_taylor(double alpha, double beta, double z, double tol);
SeriesResult ml_asymptotic(double alpha, double beta, double z, double tol);
/// Trapezoidal rule on an optimal parabolic Hankel contour; z < 0, 0 < alpha <= 1.
double ml_contour(double alpha, double beta, double z);
/// alpha = 1 via Kummer's transformation; z <= 0.
double ml_alpha_one(double beta, double z);
/// alpha = 2, z <= 0: the power series summed in extended precision.
double ml_alpha_two(double beta, double z);

}  // namespace detail
}  // namespace fracmc
