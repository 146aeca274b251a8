#pragma once

// Thin wrappers over Boost.Math quadrature. Finite pieces use adaptive
// Gauss-Kronrod (61 points); half-line tails use exp-sinh, which copes with
// slowly decaying algebraic integrands where truncation would not.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lightcone::quad {

inline constexpr double rel_tol = 1e-8;
inline constexpr double abs_tol = 1e-12;

template <class F>
double finite(F&& f, double a, double b, double tol = rel_tol, unsigned depth = 15) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, depth, tol, &err);
}

/// Integral over [a, b] split at the given interior breakpoints.
template <class F>
double piecewise(F&& f, double a, double b, std::vector<double> breaks, double tol = rel_tol) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double sum = 0.0;
  for (size_t i = 0; i + 1 < breaks.size(); ++i) {
    double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
    if (hi > lo) sum += finite(f, lo, hi, tol);
  }
  return sum;
}

/// Integral over [a, inf).
template <class F>
double upper_tail(F&& f, double a, double tol = rel_tol) {
  static thread_local boost::math::quadrature::exp_sinh<double> es;
  auto shifted = [&](double u) { return f(a + u); };
  return es.integrate(shifted, 0.0, std::numeric_limits<double>::infinity(), tol);
}

/// Integral over (-inf, b].
template <class F>
double lower_tail(F&& f, double b, double tol = rel_tol) {
  return upper_tail([&](double u) { return f(2.0 * b - u); }, b, tol);
}

/// Integral over the real line with breakpoints; tails beyond the outermost
/// breakpoints go through exp-sinh.
template <class F>
double real_line(F&& f, std::vector<double> breaks, double tol = rel_tol) {
  if (breaks.empty()) breaks.push_back(0.0);
  std::sort(breaks.begin(), breaks.end());
  double sum = lower_tail(f, breaks.front(), tol) + upper_tail(f, breaks.back(), tol);
  for (size_t i = 0; i + 1 < breaks.size(); ++i) sum += finite(f, breaks[i], breaks[i + 1], tol);
  return sum;
}

}  // namespace lightcone::quad
