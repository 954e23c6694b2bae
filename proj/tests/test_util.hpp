#pragma once

// Shared test helpers: quasi-Monte-Carlo oracles and small statistics
// utilities. These stay independent of the library's quadrature and table
// machinery so they can serve as oracles for it.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace testutil {

// Halton low-discrepancy sequence (1-based index).
inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Acklam's rational approximation of the standard normal quantile.
inline double inverse_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Quasi-Monte-Carlo oracle for E{ min(log2(1 + |h|^2 P), i_max) | hhat }:
// h | hhat ~ CN(sqrt(rho) hhat, (1-rho) v), integrated with a Halton stream
// pushed through the normal quantile. Deterministic, error well below 1e-4
// at n = 1e6; serves as the independent check of the quadrature path.
inline double qmc_conditional_mi(double hhat_mag, double power, double rho,
                                 double variance, double i_max,
                                 std::uint64_t n = 1000000) {
  double mean_re = std::sqrt(rho) * hhat_mag;
  double sig = std::sqrt((1.0 - rho) * variance / 2.0);
  double acc = 0.0;
  for (std::uint64_t i = 1; i <= n; ++i) {
    double u1 = halton(i, 2), u2 = halton(i, 3);
    u1 = std::min(std::max(u1, 1e-12), 1.0 - 1e-12);
    u2 = std::min(std::max(u2, 1e-12), 1.0 - 1e-12);
    double re = mean_re + sig * inverse_normal_cdf(u1);
    double im = sig * inverse_normal_cdf(u2);
    double g2 = re * re + im * im;
    acc += std::min(std::log2(1.0 + g2 * power), i_max);
  }
  return acc / static_cast<double>(n);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace testutil
