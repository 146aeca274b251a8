#pragma once

// Bound-side calculus: the ||.||_{n,p} norms and their explicit majorants,
// convolution and time-integral lemmas, the interaction kernel K_t, the
// iterated series terms, and the many-body envelope Xi_mb.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "lightcone/error.hpp"
#include "lightcone/grid.hpp"
#include "lightcone/onebody.hpp"
#include "lightcone/quadrature.hpp"
#include "lightcone/smooth_step.hpp"

namespace lightcone {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

// --- ||f||_{n,p} ---------------------------------------------------------------

/// A C^{n+2} function on the real line described by analytic derivatives.
/// Outside [lo, hi] the function is constant (left_value, right_value), so all
/// its derivatives vanish there. Infinite lo/hi are allowed if `decay` bounds
/// the algebraic decay of every derivative: |f^{(k)}(x)| <~ |x|^{-decay}.
struct SmoothProfile {
  std::function<double(double x, int k)> derivative;
  double lo = 0.0;
  double hi = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;
  double decay = infinity;
  std::vector<double> breakpoints;

  static SmoothProfile constant(double c) {
    SmoothProfile f;
    f.derivative = [](double, int) { return 0.0; };
    f.left_value = f.right_value = c;
    return f;
  }

  static SmoothProfile cutoff(const EnergyCutoff& g) {
    SmoothProfile f;
    f.derivative = [g](double x, int k) { return g.derivative(x, k); };
    f.lo = g.energy();
    f.hi = g.alpha() * g.energy();
    f.left_value = 1.0;
    f.right_value = 0.0;
    return f;
  }
};

inline double bracket(double x) { return std::sqrt(1.0 + x * x); }

/// iota_k = int <x>^{-k-1} dx.
inline double iota(double k) {
  require(k > 0.0, errc::divergence, "iota_k diverges for k <= 0");
  return 2.0 * quad::upper_tail([k](double x) { return std::pow(1.0 + x * x, -0.5 * (k + 1.0)); }, 0.0, 1e-14);
}

/// ||f||_{n,p} = sum_{k=0}^{n+2} int <x>^{k-p-1} |f^{(k)}(x)| dx.
inline double norm_np(const SmoothProfile& f, int n, double p) {
  require(n >= 0 && n + 2 <= max_jet_order, errc::parameter, "norm order out of range");
  double total = 0.0;
  for (int k = 0; k <= n + 2; ++k) {
    const double e = k - p - 1.0;
    auto integrand = [&](double x) { return std::pow(bracket(x), e) * std::abs(f.derivative(x, k)); };
    // Interior part.
    if (std::isfinite(f.lo) && std::isfinite(f.hi)) {
      total += quad::piecewise(integrand, f.lo, f.hi, f.breakpoints);
    } else {
      require(f.decay > k - p, errc::divergence,
              "||f||_{n,p} diverges: derivative " + std::to_string(k) + " decays too slowly for p");
      double a = std::isfinite(f.lo) ? f.lo : (f.breakpoints.empty() ? 0.0 : *std::min_element(f.breakpoints.begin(), f.breakpoints.end()));
      double b = std::isfinite(f.hi) ? f.hi : (f.breakpoints.empty() ? 0.0 : *std::max_element(f.breakpoints.begin(), f.breakpoints.end()));
      total += quad::piecewise(integrand, a, b, f.breakpoints);
      if (!std::isfinite(f.lo)) total += quad::lower_tail(integrand, a);
      if (!std::isfinite(f.hi)) total += quad::upper_tail(integrand, b);
    }
    // Constant tails only contribute to k = 0.
    if (k == 0) {
      auto weight = [p](double x) { return std::pow(bracket(x), -p - 1.0); };
      if (std::isfinite(f.lo) && f.left_value != 0.0) {
        require(p > 0.0, errc::divergence, "||f||_{n,p} diverges: nonzero constant tail needs p > 0");
        total += std::abs(f.left_value) * quad::lower_tail(weight, f.lo);
      }
      if (std::isfinite(f.hi) && f.right_value != 0.0) {
        require(p > 0.0, errc::divergence, "||f||_{n,p} diverges: nonzero constant tail needs p > 0");
        total += std::abs(f.right_value) * quad::upper_tail(weight, f.hi);
      }
    }
  }
  return total;
}

/// Explicit majorant of ||g_E||_{n,p} in terms of the sup norms of xi^{(k)},
/// k = 0..n+2, with the split at ceil(p).
inline double corgE_bound(const std::vector<double>& xi_sup, double alpha, double E, int n, double p) {
  require(int(xi_sup.size()) >= n + 3, errc::parameter, "need sup norms of xi up to order n+2");
  require(alpha > 1.0 && E > 0.0 && p > 0.0, errc::parameter, "corgE bound needs alpha > 1, E > 0, p > 0");
  const int cp = int(std::ceil(p));
  double sum = iota(p) * xi_sup[0];
  for (int k = 1; k <= std::min(cp, n + 2); ++k) sum += xi_sup[size_t(k)] / std::pow((alpha - 1.0) * E, k - 1);
  for (int k = cp + 1; k <= n + 2; ++k)
    sum += std::pow(alpha / (alpha - 1.0), k - 1) * std::pow(bracket(E), k - p - 1.0) / std::pow(E, k - 1) *
           xi_sup[size_t(k)];
  return sum;
}

inline double corgE_bound(double alpha, double E, int n, double p) {
  std::vector<double> sup(size_t(n) + 3);
  for (int k = 0; k <= n + 2; ++k) sup[size_t(k)] = xi_sup_norm(k);
  return corgE_bound(sup, alpha, E, n, p);
}

// --- convolution of polynomially decaying envelopes ------------------------------

/// c (1 v scale |x|)^{-exponent}
struct PowerEnvelope {
  double c = 1.0;
  double exponent = 2.0;
  double scale = 1.0;
  double operator()(double r) const { return c * std::pow(std::max(1.0, scale * r), -exponent); }
};

struct ConvolutionSample {
  double x = 0.0;
  double value = 0.0;
  double reference = 0.0;  // c_f c_g (a ^ b)^{-d} (1 v (a ^ b)|x|)^{-(m ^ n)}
  double ratio = 0.0;
};

struct ConvolutionCheck {
  std::vector<ConvolutionSample> samples;
  double fitted_c = 0.0;
  bool pass = false;
};

/// |f * g|(x) for radial envelopes, with x along the first axis.
inline double envelope_convolution(const PowerEnvelope& f, const PowerEnvelope& g, int d, double x) {
  const double rf = 1.0 / f.scale, rg = 1.0 / g.scale;
  if (d == 1) {
    auto h = [&](double y) { return f(std::abs(y)) * g(std::abs(x - y)); };
    std::vector<double> br{-rf, rf, x - rg, x + rg, x, 0.0};
    double lo = *std::min_element(br.begin(), br.end()), hi = *std::max_element(br.begin(), br.end());
    return quad::piecewise(h, lo, hi, br, 1e-9) + quad::lower_tail(h, lo, 1e-9) + quad::upper_tail(h, hi, 1e-9);
  }
  require(d == 2, errc::parameter, "dimension must be 1 or 2");
  // Polar coordinates around the origin; the angular integrand has a kink
  // where |x - y| = 1/g.scale.
  auto angular = [&](double r) {
    auto h = [&](double th) { return g(std::sqrt(std::max(0.0, x * x + r * r - 2.0 * x * r * std::cos(th)))); };
    std::vector<double> br;
    if (x > 0.0 && r > 0.0) {
      double c = (x * x + r * r - rg * rg) / (2.0 * x * r);
      if (c > -1.0 && c < 1.0) br.push_back(std::acos(c));
    }
    return 2.0 * quad::piecewise(h, 0.0, std::numbers::pi, br, 1e-9);
  };
  auto radial = [&](double r) { return r * f(r) * angular(r); };
  std::vector<double> br{rf, std::abs(x - rg), x + rg, x};
  double hi = *std::max_element(br.begin(), br.end());
  return quad::piecewise(radial, 0.0, hi, br, 1e-9) + quad::upper_tail(radial, hi, 1e-9);
}

/// Fits the constant in |f*g|(x) <= c c_f c_g (a^b)^{-d} (1 v (a^b)|x|)^{-(m^n)}
/// over the sample points; passes when the fit is finite and <= cap.
inline ConvolutionCheck convolution_decay_check(const PowerEnvelope& f, const PowerEnvelope& g, int d,
                                                const std::vector<double>& xs, double cap = 32.0) {
  require(f.exponent > d && g.exponent > d, errc::hypothesis, "convolution lemma needs m, n > d");
  const double s = std::min(f.scale, g.scale);
  const double e = std::min(f.exponent, g.exponent);
  ConvolutionCheck out;
  for (double x : xs) {
    ConvolutionSample smp;
    smp.x = x;
    smp.value = envelope_convolution(f, g, d, std::abs(x));
    smp.reference = f.c * g.c * std::pow(s, -d) * std::pow(std::max(1.0, s * std::abs(x)), -e);
    smp.ratio = smp.value / smp.reference;
    out.fitted_c = std::max(out.fitted_c, smp.ratio);
    out.samples.push_back(smp);
  }
  out.pass = std::isfinite(out.fitted_c) && out.fitted_c <= cap;
  return out;
}

// --- time-integral lemma ---------------------------------------------------------

struct IntegralLemmaRow {
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct IntegralLemmaCheck {
  std::vector<IntegralLemmaRow> rows;
  double max_ratio = 0.0;
  bool pass = true;
};

/// int_0^t <t-s>^a <s>^b s^k ds  <=  <t>^{a+b} t^{k+1} / (k+1) on every t.
inline IntegralLemmaCheck integral_lemma_check(double a, double b, double k, const std::vector<double>& ts) {
  require(a > 0.0 && b > 0.0 && k >= 0.0, errc::parameter, "integral lemma needs a, b > 0 and k >= 0");
  IntegralLemmaCheck out;
  for (double t : ts) {
    require(t >= 0.0, errc::parameter, "integral lemma times must be non-negative");
    IntegralLemmaRow row;
    row.t = t;
    row.lhs = quad::finite(
        [&](double s) { return std::pow(bracket(t - s), a) * std::pow(bracket(s), b) * std::pow(s, k); }, 0.0, t,
        1e-12);
    row.rhs = std::pow(bracket(t), a + b) * std::pow(t, k + 1.0) / (k + 1.0);
    if (row.rhs > 0.0) out.max_ratio = std::max(out.max_ratio, row.lhs / row.rhs);
    if (row.lhs > row.rhs * (1.0 + 1e-12)) out.pass = false;
    out.rows.push_back(row);
  }
  return out;
}

// --- interaction, kernel, envelopes ---------------------------------------------

/// Pair interaction sampled as a function of the displacement (centered at
/// the origin of the grid), with its polynomial envelope parameters.
struct InteractionSpec {
  GridFunction W;
  double c_W = 0.0;
  int n_W = 1;

  double l1_norm() const { return W.l1_norm(); }

  /// Samples a radial profile and fits the smallest c_W for the given n_W.
  template <class Profile>
  static InteractionSpec radial(const Grid& grid, Profile&& w, int n_W) {
    require(n_W >= 1, errc::parameter, "n_W must be positive");
    InteractionSpec s;
    s.n_W = n_W;
    const Coord origin{0.0, 0.0};
    s.W = GridFunction::sample(grid, [&](const Coord& y) { return cplx(w(grid.distance(y, origin))); });
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      double r = grid.distance(grid.coordinate(i), origin);
      s.c_W = std::max(s.c_W, std::abs(s.W[i]) / std::pow(std::min(1.0, r > 0 ? 1.0 / r : 1.0), n_W));
    }
    return s;
  }

  /// Envelope and reflection-symmetry violations; empty when admissible.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    const Grid& g = W.grid();
    const Coord origin{0.0, 0.0};
    for (Eigen::Index i = 0; i < W.size(); ++i) {
      double r = g.distance(g.coordinate(i), origin);
      double env = c_W * std::pow(std::min(1.0, r > 0 ? 1.0 / r : 1.0), n_W);
      if (std::abs(W[i]) > env * (1.0 + 1e-12)) {
        out.push_back("|W| exceeds c_W (1 ^ 1/|x|)^{n_W} at r = " + std::to_string(r));
        break;
      }
    }
    if ((W.reflected().values() - W.values()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, W.sup_norm()))
      out.push_back("W(x) != W(-x)");
    if (W.values().imag().cwiseAbs().maxCoeff() > 0.0) out.push_back("W must be real");
    return out;
  }
};

/// x -> <e^{-itT} f, phi_x> over grid points x, where phi is given centered
/// at the origin.
inline GridFunction propagated_overlap_profile(const OneBodyOperator& T, const GridFunction& f,
                                               const GridFunction& phi, double t) {
  GridFunction psi = T.propagate(f, t);
  return periodic_convolve(psi.conj(), phi.reflected());
}

/// K_t(f, x) = ||W||_1 |<e^{-itT} f, phi_x>| + (|W| * |<e^{-itT} f, phi_.>|)(x).
inline GridFunction kernel_Kt(const OneBodyOperator& T, const GridFunction& f, const InteractionSpec& W,
                              const GridFunction& phi, double t) {
  GridFunction o = propagated_overlap_profile(T, f, phi, t).abs();
  GridFunction conv = periodic_convolve(W.W.abs(), o);
  return GridFunction(f.grid(), (W.l1_norm() * o.values() + conv.values()).real().cast<cplx>());
}

/// int int G_{n,t}(x-y) |f(x)|^2 |g(y)|^2, via <|f|^2, G * |g|^2>.
inline double rhs_envelope(const GridFunction& f, const GridFunction& g, int n, double t) {
  require(f.grid() == g.grid(), errc::shape, "rhs_envelope operands live on different grids");
  GridFunction G = envelope_profile(f.grid(), n, t);
  GridFunction c = periodic_convolve(G, g.abs_squared());
  return (f.values().cwiseAbs2().array() * c.values().real().array()).sum() * f.grid().cell_volume();
}

/// Same quantity as a direct double Riemann sum (O(N^2), reference path).
inline double rhs_envelope_direct(const GridFunction& f, const GridFunction& g, int n, double t) {
  require(f.grid() == g.grid(), errc::shape, "rhs_envelope operands live on different grids");
  const Grid& grid = f.grid();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    double fi = std::norm(f[i]);
    if (fi == 0.0) continue;
    Coord x = grid.coordinate(i);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      double gj = std::norm(g[j]);
      if (gj != 0.0) sum += decay_envelope(n, t, grid.distance(x, grid.coordinate(j))) * fi * gj;
    }
  }
  return sum * grid.cell_volume() * grid.cell_volume();
}

// --- constants and the many-body envelope ------------------------------------------

struct BoundParams {
  int n = 2;
  double delta = 0.5;
  double sigma = 1.0;
  double alpha = 2.0;
  int n_V = 4;
  int n_W = 2;
  double c_W = 1.0;
  double W_l1 = 1.0;
  double C_ob0 = 1.0;
  double C_ob1 = 1.0;
  double C_nW = 1.0;
  double C_phi = 1.0;
  double C_mb1 = 1.0;
  double C_mb2 = 1.0;

  void validate() const {
    require(n >= 1, errc::parameter, "n must be positive");
    require(2 * n <= n_V && n <= n_W, errc::hypothesis, "need n <= n_V/2 ^ n_W");
    require(alpha > 1.0, errc::parameter, "alpha must exceed 1");
    for (double c : {delta, sigma, c_W, W_l1, C_ob0, C_ob1, C_nW, C_phi, C_mb1, C_mb2})
      require(c > 0.0 && std::isfinite(c), errc::parameter, "bound constants must be positive and finite");
  }

  /// Constants making sum_k S_{k+1} <= Xi_mb * envelope hold term by term:
  /// C_mb1 = 2 C_ob0^2 C_nW ||phi||^4 and C_mb2 = C_ob0 C_nW C_phi ||phi||^4.
  void derive_manybody_constants(double phi_norm) {
    const double p4 = std::pow(phi_norm, 4);
    C_mb1 = 2.0 * C_ob0 * C_ob0 * C_nW * p4;
    C_mb2 = C_ob0 * C_nW * C_phi * p4;
  }

  /// C_{n,W} = 2 (||W||_1^2 + c_W ||W||_1 C_n) with C_n the convolution constant.
  static double kernel_prefactor(double W_l1, double c_W, double C_n) {
    return 2.0 * (W_l1 * W_l1 + c_W * W_l1 * C_n);
  }
};

struct SaturatingValue {
  double value = 0.0;
  bool saturated = false;  // true when the bound overflowed (reported as vacuous)
};

/// Xi_mb(t) = C_mb1 |t| <t>^{2(1+2 delta+d)} exp(C_mb2 <t>^{1+2 delta+3d} t^2).
inline SaturatingValue xi_mb_checked(double t, const BoundParams& P, int d) {
  if (t == 0.0) return {0.0, false};
  const double bt = bracket(t);
  double lg = std::log(P.C_mb1) + std::log(std::abs(t)) + 2.0 * (1.0 + 2.0 * P.delta + d) * std::log(bt) +
              P.C_mb2 * std::pow(bt, 1.0 + 2.0 * P.delta + 3.0 * d) * t * t;
  if (lg >= std::log(std::numeric_limits<double>::max())) return {infinity, true};
  return {std::exp(lg), false};
}

inline double xi_mb(double t, const BoundParams& P, int d) { return xi_mb_checked(t, P, d).value; }

inline double log_odd_double_factorial(int k) {
  // 1 * 3 * ... * (2k-1) = (2k)! / (2^k k!)
  return std::lgamma(2.0 * k + 1.0) - k * std::log(2.0) - std::lgamma(k + 1.0);
}

struct SeriesTerms {
  std::vector<double> S;  // S[k-1] bounds S_k, k = 1..k_max
  std::vector<double> R;  // R[N-1] bounds R_N, N = 1..k_max
  int k_star = 0;         // first k after which S_{k+1} < S_k holds throughout
  bool converged = true;  // false: terms still growing at k_max (horizon warning)
};

/// Upper bounds for the iterated terms S_k and remainders R_N.
/// envelope_fg = int |f|^2 (G_{n,t} * |g|^2) and mass_f = int (G_{n,t} * |f|^2).
inline SeriesTerms series_terms(int k_max, double t, const BoundParams& P, int d, double phi_norm, double g_norm,
                                double envelope_fg, double mass_f) {
  require(k_max >= 1 && k_max <= 40, errc::parameter, "k_max must be in [1, 40]");
  SeriesTerms out;
  const double bt = bracket(t), at = std::abs(t);
  const double a = 1.0 + 2.0 * P.delta;
  auto finish = [](double lg, double scale) {
    if (scale == 0.0) return 0.0;
    return std::exp(std::min(lg, std::log(std::numeric_limits<double>::max()))) * scale;
  };
  for (int k = 1; k <= k_max; ++k) {
    if (at == 0.0) {
      out.S.push_back(0.0);
      out.R.push_back(0.0);
      continue;
    }
    double lS = (k + 1) * std::log(P.C_ob0) + k * std::log(P.C_nW) + (k - 1) * std::log(P.C_phi) +
                4.0 * k * std::log(phi_norm) + k * std::log(2.0) + (a * (k + 1) + d * (3.0 * k - 1)) * std::log(bt) +
                (2.0 * k - 1) * std::log(at) - log_odd_double_factorial(k);
    double lR = std::log(36.0) + 2.0 * std::log(g_norm) + (k + 1) * std::log(P.C_nW * P.C_ob0) +
                (k - 1) * std::log(P.C_phi) + 4.0 * k * std::log(phi_norm) + k * std::log(2.0) +
                (a * (k + 1) + d * (2.0 * k - 1)) * std::log(bt) + (2.0 * k - 1) * std::log(at) -
                log_odd_double_factorial(k);
    out.S.push_back(finish(lS, envelope_fg));
    out.R.push_back(finish(lR, mass_f));
  }
  int last_growth = 0;
  for (int k = 1; k < k_max; ++k)
    if (out.S[size_t(k)] >= out.S[size_t(k - 1)] && out.S[size_t(k)] > 0.0) last_growth = k;
  out.k_star = last_growth + 1;
  out.converged = last_growth < k_max - 1;
  return out;
}

/// int (G_{n,t} * |f|^2)(x) dx on the grid.
inline double envelope_mass(const GridFunction& f, int n, double t) {
  GridFunction G = envelope_profile(f.grid(), n, t);
  return periodic_convolve(G, f.abs_squared()).integral().real();
}

// --- fitted constants -------------------------------------------------------------

struct ConstantFit {
  std::string name;
  double fitted_value = 0.0;
  double sweep_lo = 0.0;
  double sweep_hi = 0.0;
  double max_ratio = 0.0;
};

}  // namespace lightcone
