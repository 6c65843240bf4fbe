#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "aoiopt/errors.hpp"

// Special functions for the fading-channel model: J0, modified Bessel I_k and
// the first-order Marcum Q-function. Everything here is a pure function of its
// arguments; errors are thrown, never returned as NaN.
//
// Accuracy contracts (double precision):
//   bessel_j0   absolute error <= 1e-10 for |x| <= 50
//   bessel_i    relative error <= 1e-10 for x <= 50
//   marcum_q1   within 1e-8 of the defining integral for a, b <= 8

namespace aoiopt::numerics {

struct NumericTolerance {
  double abs_tol = 1e-14;
  double rel_tol = 1e-12;
  int max_terms = 512;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
      throw ConfigError("NumericTolerance: tolerances must be positive");
    if (max_terms < 16)
      throw ConfigError("NumericTolerance: max_terms must be at least 16");
  }
};

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;

// Hankel asymptotic expansion of J0, summed to its smallest term.
// Valid (and only used) for x > 14, where the optimal truncation error is
// below 1e-11.
inline double bessel_j0_asymptotic(double x) {
  const double z8 = 8.0 * x;
  double t = 1.0;
  double p = 1.0;  // 1 - t2 + t4 - ...
  double q = 0.0;  // -t1 + t3 - t5 + ...
  double prev = 1.0;
  for (int j = 1; j <= 40; ++j) {
    const double odd = 2.0 * j - 1.0;
    t *= odd * odd / (j * z8);
    if (t >= prev) break;  // asymptotic series started diverging
    prev = t;
    const int k = j / 2;
    const double signed_t = ((j % 2 == 1) ? (k % 2 ? t : -t) : (k % 2 ? -t : t));
    if (j % 2 == 1)
      q += signed_t;
    else
      p += signed_t;
    if (t < 1e-19) break;
  }
  const double chi = x - kPi / 4.0;
  return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace detail

// Zero-order Bessel function of the first kind. Ascending power series for
// |x| <= 14, Hankel asymptotic form beyond.
inline double bessel_j0(double x) {
  if (!std::isfinite(x)) throw DomainError("bessel_j0: non-finite argument");
  x = std::fabs(x);
  double r;
  if (x <= 14.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1; j <= 64; ++j) {
      term *= -q / (static_cast<double>(j) * j);
      sum += term;
      if (std::fabs(term) < 1e-18) break;
    }
    r = sum;
  } else {
    r = detail::bessel_j0_asymptotic(x);
  }
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

// Modified Bessel function of the first kind, integer order k >= 0.
// Ascending series; all terms are nonnegative, so there is no cancellation.
inline double bessel_i(int k, double x) {
  if (k < 0) throw DomainError("bessel_i: order must be nonnegative");
  if (!std::isfinite(x) || x < 0.0)
    throw DomainError("bessel_i: argument must be finite and nonnegative");
  if (x > 712.0) throw AccuracyError("bessel_i: argument overflows double range");
  if (x == 0.0) return k == 0 ? 1.0 : 0.0;
  const double q = 0.25 * x * x;
  // (x/2)^k / k! through logs so large k does not overflow prematurely.
  double term = std::exp(k * std::log(0.5 * x) - std::lgamma(k + 1.0));
  double sum = term;
  for (int j = 1; j <= 1000; ++j) {
    term *= q / (static_cast<double>(j) * (j + k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// e^-x I_k(x); usable far beyond the overflow point of bessel_i as long as
// the order stays small relative to the argument (k^2 < x/8).
inline double bessel_i_scaled(int k, double x) {
  if (k < 0) throw DomainError("bessel_i_scaled: order must be nonnegative");
  if (!std::isfinite(x) || x < 0.0)
    throw DomainError("bessel_i_scaled: argument must be finite and nonnegative");
  const double mu = 4.0 * static_cast<double>(k) * k;
  if (x > 40.0 && mu < 0.5 * x) {
    // Large-argument asymptotic series, summed to its smallest term.
    const double z8 = 8.0 * x;
    double t = 1.0;
    double sum = 1.0;
    double prev = 1.0;
    for (int j = 1; j <= 40; ++j) {
      const double odd = 2.0 * j - 1.0;
      t *= -(mu - odd * odd) / (j * z8);
      if (std::fabs(t) >= prev) break;
      prev = std::fabs(t);
      sum += t;
      if (std::fabs(t) < 1e-17) break;
    }
    return sum / std::sqrt(2.0 * detail::kPi * x);
  }
  if (x <= 700.0) return bessel_i(k, x) * std::exp(-x);
  throw AccuracyError("bessel_i_scaled: order too large for this argument");
}

namespace detail {

// Integrand of the defining Marcum integral with the Gaussian/Bessel overflow
// factored out: x exp(-(x^2+a^2)/2) I0(ax) = x exp(-(x-a)^2/2) [e^-ax I0(ax)].
inline double marcum_integrand(double a, double x) {
  const double d = x - a;
  return x * std::exp(-0.5 * d * d) * bessel_i_scaled(0, a * x);
}

inline double adaptive_simpson(double a_param, double lo, double hi, double flo,
                               double fmid, double fhi, double whole, double tol,
                               int depth) {
  const double mid = 0.5 * (lo + hi);
  const double lmid = 0.5 * (lo + mid);
  const double rmid = 0.5 * (mid + hi);
  const double flmid = marcum_integrand(a_param, lmid);
  const double frmid = marcum_integrand(a_param, rmid);
  const double left = (mid - lo) / 6.0 * (flo + 4.0 * flmid + fmid);
  const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frmid + fhi);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(a_param, lo, mid, flo, flmid, fmid, left, 0.5 * tol,
                          depth - 1) +
         adaptive_simpson(a_param, mid, hi, fmid, frmid, fhi, right, 0.5 * tol,
                          depth - 1);
}

}  // namespace detail

// Q_1(a, b) by adaptive quadrature of the defining integral. Accuracy route
// and fallback for arguments too large for the series.
inline double marcum_q1_quadrature(double a, double b, double tol = 1e-11) {
  if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0)
    throw DomainError("marcum_q1_quadrature: arguments must be finite and nonnegative");
  if (b == 0.0) return 1.0;
  // The integrand is a Gaussian bump centered at ~a; 45 sigmas cover it.
  const double hi = std::max(a, b) + 45.0;
  const double mid = 0.5 * (b + hi);
  const double flo = detail::marcum_integrand(a, b);
  const double fmid = detail::marcum_integrand(a, mid);
  const double fhi = detail::marcum_integrand(a, hi);
  const double whole = (hi - b) / 6.0 * (flo + 4.0 * fmid + fhi);
  double r = detail::adaptive_simpson(a, b, hi, flo, fmid, fhi, whole, tol, 48);
  if (r < 0.0) r = 0.0;
  if (r > 1.0) r = 1.0;
  return r;
}

// First-order Marcum Q-function. Canonical Bessel series with the Gaussian
// prefactor kept in scaled form; terms are nonnegative, truncation stops once
// a term falls below abs_tol times the partial sum (and terms are decaying).
// Falls back to quadrature when a*b is large enough that the series would
// need the overflowing unscaled regime end to end.
inline double marcum_q1(double a, double b, const NumericTolerance& tol = {}) {
  tol.validate();
  if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0)
    throw DomainError("marcum_q1: arguments must be finite and nonnegative");
  if (b == 0.0) return 1.0;
  if (a == 0.0) return std::exp(-0.5 * b * b);
  const double ab = a * b;
  if (ab > 700.0) return marcum_q1_quadrature(a, b);

  const double diff = a - b;
  const double pref = std::exp(-0.5 * diff * diff);
  double sum = 0.0;
  double prev_term = std::numeric_limits<double>::max();
  bool converged = false;
  if (a < b) {
    // Q = pref * sum_{k>=0} (a/b)^k e^-ab I_k(ab)
    const double r = a / b;
    double rk = 1.0;
    for (int k = 0; k < tol.max_terms; ++k) {
      const double term = rk * bessel_i_scaled(k, ab);
      sum += term;
      if (k > 0 && term < tol.abs_tol * sum && term <= prev_term) {
        converged = true;
        break;
      }
      prev_term = term;
      rk *= r;
    }
    if (!converged) throw AccuracyError("marcum_q1: series did not converge");
    sum = pref * sum;
  } else {
    // Complement form for a >= b: Q = 1 - pref * sum_{k>=1} (b/a)^k e^-ab I_k(ab)
    const double r = b / a;
    double rk = r;
    for (int k = 1; k <= tol.max_terms; ++k) {
      const double term = rk * bessel_i_scaled(k, ab);
      sum += term;
      if (k > 1 && term < tol.abs_tol * sum && term <= prev_term) {
        converged = true;
        break;
      }
      prev_term = term;
      rk *= r;
    }
    if (!converged) throw AccuracyError("marcum_q1: series did not converge");
    sum = 1.0 - pref * sum;
  }
  if (sum < 0.0) sum = 0.0;
  if (sum > 1.0) sum = 1.0;
  return sum;
}

}  // namespace aoiopt::numerics
