#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "failbench/error.hpp"

namespace failbench {

// Neumaier-compensated sum; keeps zero-variance detection exact when all
// inputs are bitwise equal.
inline double compensated_sum(std::span<const double> xs) {
  double s = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x)) {
      comp += (s - t) + x;
    } else {
      comp += (x - t) + s;
    }
    s = t;
  }
  return s + comp;
}

inline double mean(std::span<const double> xs) {
  require(!xs.empty(), Errc::empty_input, "mean of empty sample");
  return compensated_sum(xs) / static_cast<double>(xs.size());
}

// Unbiased sample variance, two-pass. Identical inputs give exactly 0.
inline double sample_variance(std::span<const double> xs) {
  require(xs.size() >= 2, Errc::empty_input, "variance needs >= 2 values");
  const double m = mean(xs);
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - m;
    sq[i] = d * d;
  }
  return compensated_sum(sq) / static_cast<double>(xs.size() - 1);
}

// Quantile with linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> xs, double q) {
  require(!xs.empty(), Errc::empty_input, "quantile of empty sample");
  std::sort(xs.begin(), xs.end());
  if (q <= 0.0) return xs.front();
  if (q >= 1.0) return xs.back();
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz).
inline double betacf(double a, double b, double x) {
  constexpr int max_iter = 300;
  constexpr double eps = 3e-16;
  constexpr double fpmin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * detail::betacf(a, b, x) / a;
  }
  return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

// Inverse of I_x(a, b) in x by bisection; I is monotone in x.
inline double ibeta_inv(double a, double b, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ibeta(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-16) break;
  }
  return 0.5 * (lo + hi);
}

// Student-t quantile via the incomplete-beta inverse. For t >= 0 and
// nu degrees of freedom, 2 * (1 - F(t)) = I_x(nu/2, 1/2) with x = nu/(nu+t^2).
inline double student_t_quantile(double p, double nu) {
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double tail2 = upper ? 2.0 * (1.0 - p) : 2.0 * p;
  const double x = ibeta_inv(nu / 2.0, 0.5, tail2);
  const double t = std::sqrt(nu * (1.0 - x) / x);
  return upper ? t : -t;
}

}  // namespace failbench
