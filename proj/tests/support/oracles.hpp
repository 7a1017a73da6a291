#pragma once

// Independent reference implementations used only by tests.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

inline double harmonic(int k) {
  double h = 0.0;
  for (int i = 1; i <= k; ++i) h += 1.0 / i;
  return h;
}

// power series, adequate for |x| <= 10
inline double j0(double x) {
  const double q = -0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 80; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

inline double i0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 80; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

inline double k0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 0.0;
  for (int k = 1; k < 80; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term * harmonic(k);
  }
  return -(std::log(0.5 * x) + std::numbers::egamma) * i0(x) + sum;
}

inline double y0(double x) {
  const double q = -0.25 * x * x;
  double term = 1.0, sum = 0.0;
  for (int k = 1; k < 80; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum -= term * harmonic(k);
  }
  return (2.0 / std::numbers::pi) * ((std::log(0.5 * x) + std::numbers::egamma) * j0(x) + sum);
}

// composite Simpson on [a, b] with n (even) panels
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
