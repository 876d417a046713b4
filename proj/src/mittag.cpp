#include "fracmc/mittag.hpp"

#include <cfloat>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace fracmc {
namespace {

constexpr double kPi = std::numbers::pi;

// sin(pi x) with exact zeros at the integers.
double sinpi(double x) {
  double r = x - 2.0 * std::round(x / 2.0);  // r in [-1, 1]
  if (r > 0.5) r = 1.0 - r;
  else if (r < -0.5) r = -1.0 - r;
  return std::sin(kPi * r);
}

// Neumaier-compensated accumulator.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
    else carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

struct ContourParams {
  double mu = 0.0;
  double h = 0.0;
  double nodes = std::numeric_limits<double>::infinity();
};

// Optimal parabolic contour s(u) = mu (1 + i u)^2 for a Laplace transform whose
// only singularity in the principal sheet is the branch point at the origin,
// of strength p. Follows the parameter selection of Garrappa's Laplace
// inversion for Mittag-Leffler functions (region unbounded to the right).
ContourParams optimal_parabola(double p, double log_epsilon) {
  constexpr double t = 1.0;
  const double log_eps = std::log(DBL_EPSILON);
  const double sq_phi_star = 0.0;
  double phibar = 0.01;
  double sq_phibar = std::sqrt(phibar);
  constexpr double f_min = 1.0, f_max = 10.0, f_tar = 5.0;

  double nodes = 0.0, a = 0.0, sq_mu = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double phi_t = phibar * t;
    const double log_eps_phi_t = log_epsilon / phi_t;
    nodes = std::ceil(phi_t / kPi * (1.0 - 1.5 * log_eps_phi_t + std::sqrt(1.0 - 2.0 * log_eps_phi_t)));
    a = kPi * nodes / phi_t;
    sq_mu = sq_phibar * std::abs(4.0 - a) / std::abs(7.0 - std::sqrt(1.0 + 12.0 * a));
    const double fbar = std::pow((sq_phibar - sq_phi_star) / sq_mu, -p);
    if (p < 1e-14 || (f_min < fbar && fbar < f_max)) break;
    sq_phibar = std::pow(f_tar, -1.0 / p) * sq_mu + sq_phi_star;
    phibar = sq_phibar * sq_phibar;
  }
  ContourParams out;
  out.mu = sq_mu * sq_mu;
  out.h = (-3.0 * a - 2.0 + 2.0 * std::sqrt(1.0 + 12.0 * a)) / (4.0 - a) / nodes;
  out.nodes = nodes;

  // Keep exp(mu t) small enough that round-off stays below the target.
  const double threshold = (log_epsilon - log_eps) / t;
  if (out.mu > threshold) {
    const double q = std::abs(p) < 1e-14 ? 0.0 : std::pow(f_tar, -1.0 / p) * std::sqrt(out.mu);
    const double phibar_star = (q + std::sqrt(0.0)) * (q + std::sqrt(0.0));
    if (phibar_star < threshold) {
      const double w = std::sqrt(log_eps / (log_eps - log_epsilon));
      const double u = std::sqrt(-phibar_star * t / log_eps);
      out.mu = threshold;
      out.nodes = std::ceil(w * log_epsilon / 2.0 / kPi / (u * w - 1.0));
      out.h = w / out.nodes;
    } else {
      out.nodes = std::numeric_limits<double>::infinity();
      out.h = 0.0;
    }
  }
  return out;
}

}  // namespace

void MLParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InputError("Mittag-Leffler: alpha must lie in (0, 1] (or (1, 2] for series)");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InputError("Mittag-Leffler: beta must be positive");
  if (!(tol > 0.0 && tol < 1.0)) throw InputError("Mittag-Leffler: tolerance must lie in (0, 1)");
}

double rgamma(double x) {
  if (!std::isfinite(x)) return x > 0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  if (x < 0.5) {
    const double s = sinpi(x);
    const double y = 1.0 - x;
    if (y < 170.0) return s * std::tgamma(y) / kPi;
    return std::copysign(std::exp(std::log(std::abs(s)) + std::lgamma(y) - std::log(kPi)), s);
  }
  if (x < 170.0) return 1.0 / std::tgamma(x);
  return std::exp(-std::lgamma(x));
}

namespace detail {

SeriesResult ml_taylor(double alpha, double beta, double z, double tol) {
  CompensatedSum sum;
  double abs_sum = 0.0;
  const double az = std::abs(z);
  const double log_az = az > 0.0 ? std::log(az) : -std::numeric_limits<double>::infinity();
  double prev = std::numeric_limits<double>::infinity();
  constexpr int kmax = 20000;
  for (int k = 0; k < kmax; ++k) {
    const double arg = alpha * k + beta;
    double mag;
    if (k == 0) {
      mag = std::abs(rgamma(beta));
    } else if (az == 0.0) {
      break;
    } else if (arg < 170.0 && k * log_az < 700.0) {
      mag = std::pow(az, k) * std::abs(rgamma(arg));
    } else {
      mag = std::exp(k * log_az - std::lgamma(arg));
    }
    const double sign = (k == 0) ? (rgamma(beta) < 0 ? -1.0 : 1.0) : ((z < 0.0 && (k % 2 == 1)) ? -1.0 : 1.0);
    sum.add(sign * mag);
    abs_sum += mag;
    if (k > 0 && mag < prev && mag <= 1e-18 * abs_sum) break;
    prev = mag;
  }
  SeriesResult out;
  out.value = sum.value();
  out.magnitude = abs_sum;
  out.accepted = std::isfinite(out.value) && abs_sum * 8.0 * DBL_EPSILON <= tol * std::abs(out.value);
  return out;
}

SeriesResult ml_asymptotic(double alpha, double beta, double z, double tol) {
  SeriesResult out;
  if (!(z < 0.0)) return out;
  CompensatedSum sum;
  const double log_az = std::log(-z);
  // Truncation is controlled by the envelope |z|^-k Gamma(1 - x) / pi of
  // |1/Gamma(x)|, x = beta - alpha k, so that terms sitting near a zero of
  // 1/Gamma do not fake convergence.
  auto envelope = [&](int k) {
    const double x = beta - alpha * k;
    const double log_r = x < 0.5 ? std::lgamma(1.0 - x) - std::log(kPi) : std::log(std::abs(rgamma(x)) + 1e-300);
    return std::exp(log_r - k * log_az);
  };
  double prev_env = std::numeric_limits<double>::infinity();
  double omitted = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 2000; ++k) {
    const double env = envelope(k);
    if (env > prev_env) {
      omitted = env;
      break;
    }
    // term = -z^{-k} r with z^{-k} = (-1)^k |z|^{-k}
    const double r = rgamma(beta - alpha * k);
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    sum.add(sign * r * std::exp(-k * log_az));
    prev_env = env;
    if (env <= 1e-18 * std::abs(sum.value())) {
      omitted = envelope(k + 1);
      break;
    }
  }
  out.value = sum.value();
  out.magnitude = omitted;
  out.accepted = std::isfinite(out.value) && out.value != 0.0 && omitted <= tol * std::abs(out.value);
  return out;
}

double ml_contour(double alpha, double beta, double z) {
  if (!(z < 0.0)) throw InputError("ml_contour: requires z < 0");
  // For z < 0 and alpha < 1 the poles of s^(alpha-beta)/(s^alpha - z) lie off
  // the principal sheet; for alpha = 1 the single pole sits on the negative
  // axis, which every parabola of this family encloses.
  const double p = std::max(0.0, -2.0 * (alpha - beta + 1.0));
  double log_epsilon = std::log(1e-15);
  ContourParams cp = optimal_parabola(p, log_epsilon);
  for (int relax = 0; relax < 10 && !(cp.nodes <= 200.0); ++relax) {
    log_epsilon += std::log(10.0);
    cp = optimal_parabola(p, log_epsilon);
  }
  if (!(cp.nodes <= 200.0)) throw NumericalError("ml_contour: no admissible contour");
  const auto n = static_cast<int>(cp.nodes);
  using C = std::complex<double>;
  CompensatedSum re;
  for (int k = -n; k <= n; ++k) {
    const double u = cp.h * k;
    const C s = cp.mu * C(1.0, u) * C(1.0, u);
    const C ds = C(-2.0 * cp.mu * u, 2.0 * cp.mu);
    const C f = std::pow(s, alpha - beta) / (std::pow(s, alpha) - z) * ds;
    const C term = std::exp(s) * f;
    // h / (2 pi i) * term, real part
    re.add(term.imag());
  }
  return cp.h * re.value() / (2.0 * kPi);
}

double ml_alpha_two(double beta, double z) {
  if (z > 0.0) throw InputError("ml_alpha_two: requires z <= 0");
  if (z < -4000.0) throw InputError("Mittag-Leffler: alpha = 2 is supported for z >= -4000 only");
#ifdef __SIZEOF_FLOAT128__
  using Wide = __float128;
#else
  using Wide = long double;
#endif
  // Consecutive terms differ by z / ((2k + b)(2k + b + 1)); the partial sums
  // reach exp(sqrt|z|), so they are carried in extended precision.
  const Wide b = beta;
  const Wide w = z;
  Wide term = 1, sum = 1;
  for (int k = 0; k < 100000; ++k) {
    term *= w / ((2 * k + b) * (2 * k + b + 1));
    sum += term;
    const double t = static_cast<double>(term < 0 ? -term : term);
    if (t <= 1e-36 && 4.0 * k * k > -z) break;
  }
  return static_cast<double>(sum) * rgamma(beta);
}

double ml_alpha_one(double beta, double z) {
  if (z > 0.0) throw InputError("ml_alpha_one: requires z <= 0");
  if (beta == 1.0) return std::exp(z);
  const double x = -z;
  if (x <= 600.0) {
    // E_{1,b}(z) = e^z 1F1(b-1; b; -z) / Gamma(b)
    CompensatedSum sum;
    double term = 1.0;
    sum.add(term);
    const double a = beta - 1.0;
    for (int k = 0; k < 100000; ++k) {
      term *= (a + k) / (beta + k) * x / (k + 1.0);
      sum.add(term);
      if (std::abs(term) <= 1e-18 * std::abs(sum.value()) && k > x) break;
    }
    return std::exp(z) * sum.value() * rgamma(beta);
  }
  // Exponentially small part dropped; exact algebraic tail.
  CompensatedSum sum;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 1000; ++k) {
    const double r = rgamma(beta - k);
    if (r == 0.0) continue;
    const double mag = std::exp(-k * std::log(x)) * std::abs(r);
    if (mag > prev) break;
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    sum.add(sign * std::copysign(mag, r));
    prev = mag;
    if (mag <= 1e-18 * std::abs(sum.value())) break;
  }
  return sum.value();
}

}  // namespace detail

MLRegime ml_regime(const MLParams& params, double z) {
  params.validate();
  const MLRegimes seams;
  if (z == 0.0) return MLRegime::constant;
  if (params.alpha > 1.0 || z > 0.0) return MLRegime::taylor;
  if (params.alpha == 1.0) return MLRegime::exponential;
  if (-z <= seams.taylor_max && detail::ml_taylor(params.alpha, params.beta, z, params.tol).accepted)
    return MLRegime::taylor;
  if (-z >= seams.asymptotic_min && detail::ml_asymptotic(params.alpha, params.beta, z, params.tol).accepted)
    return MLRegime::asymptotic;
  return MLRegime::contour;
}

double ml(const MLParams& params, double z) {
  params.validate();
  if (!std::isfinite(z)) {
    if (z == -std::numeric_limits<double>::infinity()) return 0.0;
    throw InputError("Mittag-Leffler: argument must be finite");
  }
  if (z == 0.0) return rgamma(params.beta);
  if (params.alpha == 2.0 && z < 0.0) return detail::ml_alpha_two(params.beta, z);
  if (params.alpha > 1.0) {
    if (std::abs(z) > 100.0) throw InputError("Mittag-Leffler: alpha > 1 is supported for |z| <= 100 only");
    return detail::ml_taylor(params.alpha, params.beta, z, params.tol).value;
  }
  if (z > 0.0) return detail::ml_taylor(params.alpha, params.beta, z, params.tol).value;
  if (params.alpha == 1.0) return detail::ml_alpha_one(params.beta, z);

  const MLRegimes seams;
  if (-z <= seams.taylor_max) {
    const auto t = detail::ml_taylor(params.alpha, params.beta, z, params.tol);
    if (t.accepted) return t.value;
  }
  if (-z >= seams.asymptotic_min) {
    const auto a = detail::ml_asymptotic(params.alpha, params.beta, z, params.tol);
    if (a.accepted) return a.value;
  }
  return detail::ml_contour(params.alpha, params.beta, z);
}

double e_ab(const MLParams& params, double t, double lambda) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InputError("e_ab: t must be finite and >= 0");
  if (!(lambda >= 0.0)) throw InputError("e_ab: lambda must be >= 0");
  if (t == 0.0) {
    if (params.beta < 1.0) throw InputError("e_ab: t = 0 is singular for beta < 1");
    return params.beta == 1.0 ? 1.0 : 0.0;
  }
  const double z = -std::pow(t, params.alpha) * lambda;
  return std::pow(t, params.beta - 1.0) * ml(params, z);
}

std::vector<double> ml_batch(const MLParams& params, std::span<const double> z) {
  std::vector<double> out(z.size());
  const auto count = static_cast<std::ptrdiff_t>(z.size());
  std::ptrdiff_t failed = -1;
  std::string message;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = ml(params, z[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failed < 0 || i < failed) {
        failed = i;
        message = e.what();
      }
    }
  }
  if (failed >= 0) {
    std::ostringstream msg;
    msg << "ml_batch: element " << failed << ": " << message;
    throw NumericalError(msg.str());
  }
  return out;
}

}  // namespace fracmc
