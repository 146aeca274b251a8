#pragma once

// The smooth step xi(x) = b(1-x) / (b(x) + b(1-x)), b(x) = exp(-1/x) for x > 0,
// and the energy cutoff g_E(x) = xi((x - E) / ((alpha - 1) E)). Derivatives are
// exact up to rounding: evaluated by truncated Taylor-series arithmetic.

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <vector>

#include "lightcone/error.hpp"

namespace lightcone {

inline constexpr int max_jet_order = 16;

namespace detail {

// Truncated Taylor coefficients c_0..c_K of a function around a point.
struct Jet {
  std::vector<double> c;
  explicit Jet(int order, double value = 0.0) : c(size_t(order) + 1, 0.0) { c[0] = value; }
  int order() const { return int(c.size()) - 1; }
};

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.order());
  for (int k = 0; k <= r.order(); ++k)
    for (int j = 0; j <= k; ++j) r.c[k] += a.c[j] * b.c[k - j];
  return r;
}

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r(a.order());
  for (int k = 0; k <= r.order(); ++k) r.c[k] = a.c[k] + b.c[k];
  return r;
}

inline Jet reciprocal(const Jet& a) {
  Jet r(a.order());
  r.c[0] = 1.0 / a.c[0];
  for (int k = 1; k <= r.order(); ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += a.c[j] * r.c[k - j];
    r.c[k] = -s / a.c[0];
  }
  return r;
}

inline Jet exp(const Jet& a) {
  Jet r(a.order());
  r.c[0] = std::exp(a.c[0]);
  for (int k = 1; k <= r.order(); ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += j * a.c[j] * r.c[k - j];
    r.c[k] = s / k;
  }
  return r;
}

// Jet of b(x0 + s * eps) in eps, with b(x) = exp(-1/x); requires x0 > 0.
inline Jet bump_jet(double x0, double s, int order) {
  Jet u(order, x0);
  if (order >= 1) u.c[1] = s;
  Jet m = reciprocal(u);
  for (auto& v : m.c) v = -v;
  return exp(m);
}

}  // namespace detail

/// Derivatives xi^{(0..order)}(x).
inline std::vector<double> xi_derivatives(double x, int order) {
  require(order >= 0 && order <= max_jet_order, errc::parameter, "derivative order out of range");
  std::vector<double> out(size_t(order) + 1, 0.0);
  // Below this distance from the endpoints the flat tail b = exp(-1/x) and all
  // its derivatives are below 1e-280, so xi is locally constant to rounding.
  constexpr double flat = 0.0015;
  if (x <= flat) {
    out[0] = 1.0;
    return out;
  }
  if (x >= 1.0 - flat) return out;
  detail::Jet num = detail::bump_jet(1.0 - x, -1.0, order);
  detail::Jet den = detail::bump_jet(x, 1.0, order) + num;
  detail::Jet q = num * detail::reciprocal(den);
  double fact = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) fact *= k;
    out[size_t(k)] = q.c[size_t(k)] * fact;
  }
  return out;
}

inline double xi(double x) { return xi_derivatives(x, 0)[0]; }

inline double xi_derivative(double x, int k) { return xi_derivatives(x, k)[size_t(k)]; }

/// sup |xi^{(k)}| over [0,1]: dense sampling refined by golden-section search.
inline double xi_sup_norm(int k) {
  require(k >= 0 && k <= max_jet_order, errc::parameter, "derivative order out of range");
  static std::array<double, max_jet_order + 1> cache{};
  static std::array<bool, max_jet_order + 1> ready{};
  static std::mutex mu;
  std::lock_guard lock(mu);
  if (ready[size_t(k)]) return cache[size_t(k)];
  if (k == 0) {
    ready[0] = true;
    return cache[0] = 1.0;
  }
  const int samples = 4000;
  auto val = [k](double x) { return std::abs(xi_derivative(x, k)); };
  std::vector<double> v(samples + 1);
  for (int i = 0; i <= samples; ++i) v[size_t(i)] = val(double(i) / samples);
  double best = 0.0;
  for (int i = 1; i < samples; ++i) {
    if (v[size_t(i)] < v[size_t(i - 1)] || v[size_t(i)] < v[size_t(i + 1)]) continue;
    double a = double(i - 1) / samples, b = double(i + 1) / samples;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
      double c = b - g * (b - a), d = a + g * (b - a);
      if (val(c) > val(d))
        b = d;
      else
        a = c;
    }
    best = std::max({best, v[size_t(i)], val(0.5 * (a + b))});
  }
  ready[size_t(k)] = true;
  return cache[size_t(k)] = best;
}

/// g_E(x) = xi((x - E) / ((alpha - 1) E)): equals 1 below E and 0 above alpha E.
class EnergyCutoff {
 public:
  EnergyCutoff(double E, double alpha) : E_(E), alpha_(alpha) {
    require(E > 0.0 && std::isfinite(E), errc::parameter, "cutoff energy must be positive");
    require(alpha > 1.0 && std::isfinite(alpha), errc::parameter, "alpha must exceed 1");
  }

  double energy() const { return E_; }
  double alpha() const { return alpha_; }
  double width() const { return (alpha_ - 1.0) * E_; }

  double operator()(double x) const { return xi((x - E_) / width()); }

  double derivative(double x, int k) const {
    return xi_derivative((x - E_) / width(), k) / std::pow(width(), k);
  }

 private:
  double E_;
  double alpha_;
};

}  // namespace lightcone
