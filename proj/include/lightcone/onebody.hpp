#pragma once

// Discretized one-body Schroedinger operator T = kappa |p|^2 + V on a periodic
// grid. The kinetic part is the exact Fourier-multiplier Laplacian; below
// dense_eig_cap points the full eigendecomposition is cached and drives the
// functional calculus.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "lightcone/error.hpp"
#include "lightcone/grid.hpp"
#include "lightcone/smooth_step.hpp"

namespace lightcone {

inline constexpr Eigen::Index dense_eig_cap = 4096;

enum class PropagationMethod { spectral, splitstep };

struct Propagation {
  PropagationMethod method = PropagationMethod::spectral;
  double dt = 1e-3;
};

class OneBodyOperator {
 public:
  /// Assembles T and, if the grid is within the dense cap, diagonalizes it.
  /// With allow_splitstep_only the operator may exceed the cap; it then only
  /// supports split-step propagation.
  OneBodyOperator(const Grid& grid, const GridFunction& potential, double kappa = 0.5,
                  bool allow_splitstep_only = false)
      : grid_(grid), kappa_(kappa), k2_(grid.momentum_squared()) {
    require(potential.grid() == grid, errc::shape, "potential lives on a different grid");
    require(kappa > 0.0 && std::isfinite(kappa), errc::parameter, "kinetic coefficient must be positive");
    const double scale = std::max(1.0, potential.sup_norm());
    require(potential.values().imag().cwiseAbs().maxCoeff() <= 1e-12 * scale, errc::model,
            "potential must be real-valued");
    V_ = potential.values().real();
    require(V_.allFinite(), errc::model, "potential must be bounded on the grid");
    if (grid.size() <= dense_eig_cap) {
      Eigen::MatrixXd H = kappa_ * laplacian_matrix();
      H.diagonal() += V_;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      require(es.info() == Eigen::Success, errc::numerical, "eigendecomposition failed");
      spectrum_ = std::make_shared<Spectrum>(Spectrum{es.eigenvalues(), es.eigenvectors()});
    } else {
      require(allow_splitstep_only, errc::capacity,
              "grid exceeds the dense eigendecomposition cap and split-step mode is disabled");
    }
  }

  static OneBodyOperator free(const Grid& grid, double kappa = 0.5) {
    return OneBodyOperator(grid, GridFunction(grid), kappa);
  }

  const Grid& grid() const { return grid_; }
  double kappa() const { return kappa_; }
  const Eigen::VectorXd& potential() const { return V_; }
  bool has_spectrum() const { return bool(spectrum_); }

  const Eigen::VectorXd& eigenvalues() const { return spectrum().values; }
  const Eigen::MatrixXd& eigenvectors() const { return spectrum().vectors; }

  /// Dense matrix of |p|^2 (no kappa): circulant, real and symmetric.
  Eigen::MatrixXd laplacian_matrix() const {
    Eigen::VectorXd col = idft(grid_, k2_.cast<cplx>()).real();
    const Eigen::Index N = grid_.size();
    Eigen::MatrixXd K(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      auto [i0, i1] = grid_.axis_indices(i);
      for (Eigen::Index j = 0; j < N; ++j) {
        auto [j0, j1] = grid_.axis_indices(j);
        K(i, j) = col[grid_.flat_index(i0 - j0, i1 - j1)];
      }
    }
    return K;
  }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd H = kappa_ * laplacian_matrix();
    H.diagonal() += V_;
    return H;
  }

  /// Applies T to f without using the eigendecomposition.
  GridFunction apply(const GridFunction& f) const {
    check_grid(f);
    GridFunction kin = fourier_multiply(f, (kappa_ * k2_).cast<cplx>());
    return GridFunction(grid_, kin.values() + (V_.cast<cplx>().array() * f.values().array()).matrix());
  }

  /// sum_i fn(lambda_i) |v_i><v_i| f
  template <class Fn>
  GridFunction apply_function(const GridFunction& f, Fn&& fn) const {
    check_grid(f);
    const auto& s = spectrum();
    Eigen::VectorXcd c = s.vectors.transpose() * f.values();
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= cplx(fn(s.values[i]));
    return GridFunction(grid_, s.vectors * c);
  }

  /// Dense matrix of fn(T).
  template <class Fn>
  Eigen::MatrixXcd function_matrix(Fn&& fn) const {
    const auto& s = spectrum();
    Eigen::VectorXcd w(s.values.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = cplx(fn(s.values[i]));
    Eigen::MatrixXcd Vc = s.vectors.cast<cplx>();
    return Vc * w.asDiagonal() * s.vectors.transpose().cast<cplx>();
  }

  /// e^{-itT} f.
  GridFunction propagate(const GridFunction& f, double t, Propagation how = {}) const {
    check_grid(f);
    if (t == 0.0) return f;
    if (how.method == PropagationMethod::spectral)
      return apply_function(f, [t](double l) { return std::exp(cplx(0.0, -l * t)); });
    require(how.dt > 0.0, errc::parameter, "split-step dt must be positive");
    const long steps = std::max(1L, long(std::ceil(std::abs(t) / how.dt)));
    const double dt = t / double(steps);
    Eigen::ArrayXcd half_v = (V_.array() * cplx(0.0, -0.5 * dt)).exp();
    Eigen::ArrayXcd kin = (k2_.array() * cplx(0.0, -kappa_ * dt)).exp();
    Eigen::VectorXcd psi = f.values();
    for (long s = 0; s < steps; ++s) {
      psi.array() *= half_v;
      Eigen::VectorXcd k = dft(grid_, psi);
      k.array() *= kin;
      psi = idft(grid_, std::move(k));
      psi.array() *= half_v;
    }
    return GridFunction(grid_, std::move(psi));
  }

  /// g_E(T) applied to f.
  GridFunction spectral_cutoff(const GridFunction& f, const EnergyCutoff& g) const {
    return apply_function(f, [&g](double l) { return g(l); });
  }

  Eigen::MatrixXcd spectral_cutoff_matrix(const EnergyCutoff& g) const {
    return function_matrix([&g](double l) { return g(l); });
  }

  /// c_E = || |p| 1_{(-inf, alpha^2 E]}(T) ||.
  double c_E(double alpha, double E) const {
    require(alpha > 1.0 && E > 0.0, errc::parameter, "c_E needs alpha > 1 and E > 0");
    const auto& s = spectrum();
    const double top = alpha * alpha * E;
    Eigen::Index m = 0;
    while (m < s.values.size() && s.values[m] <= top) ++m;
    if (m == 0) return 0.0;
    // || |p| P ||^2 is the top eigenvalue of P |p|^2 P on the window.
    Eigen::MatrixXd W = s.vectors.leftCols(m);
    Eigen::MatrixXd KW(W.rows(), m);
    for (Eigen::Index j = 0; j < m; ++j)
      KW.col(j) = fourier_multiply(GridFunction(grid_, W.col(j).cast<cplx>()), k2_.cast<cplx>()).values().real();
    Eigen::MatrixXd G = W.transpose() * KW;
    G = 0.5 * (G + G.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }

  /// || 1_{|x| >= R} e^{-itT} g_E(T) 1_{|x| <= r} || with distances measured
  /// from the origin.
  double propagation_norm(const EnergyCutoff& g, double r, double R, double t) const {
    require(r > 0.0 && R > r, errc::parameter, "propagation_norm needs R > r > 0");
    require(R <= 0.5 * grid_.length(), errc::parameter, "outer radius exceeds half the box");
    const auto& s = spectrum();
    std::vector<Eigen::Index> inner_idx, outer_idx;
    const Coord origin{0.0, 0.0};
    for (Eigen::Index i = 0; i < grid_.size(); ++i) {
      double d = grid_.distance(grid_.coordinate(i), origin);
      if (d <= r) inner_idx.push_back(i);
      if (d >= R) outer_idx.push_back(i);
    }
    if (inner_idx.empty() || outer_idx.empty()) return 0.0;
    Eigen::VectorXcd w(s.values.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = std::exp(cplx(0.0, -s.values[i] * t)) * g(s.values[i]);
    // The composition is exactly the identity here, and the indicators are disjoint.
    if ((w.array() == cplx(1.0)).all()) return 0.0;
    Eigen::MatrixXd Vin(inner_idx.size(), s.vectors.cols());
    for (size_t a = 0; a < inner_idx.size(); ++a) Vin.row(Eigen::Index(a)) = s.vectors.row(inner_idx[a]);
    Eigen::MatrixXcd right = w.asDiagonal() * Vin.transpose().cast<cplx>();
    Eigen::MatrixXcd A(outer_idx.size(), inner_idx.size());
    for (size_t b = 0; b < outer_idx.size(); ++b)
      A.row(Eigen::Index(b)) = s.vectors.row(outer_idx[b]).cast<cplx>() * right;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    return svd.singularValues()[0];
  }

 private:
  struct Spectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
  };

  const Spectrum& spectrum() const {
    require(bool(spectrum_), errc::capacity,
            "functional calculus unavailable above the dense eigendecomposition cap");
    return *spectrum_;
  }

  void check_grid(const GridFunction& f) const {
    require(f.grid() == grid_, errc::shape, "function lives on a different grid");
  }

  Grid grid_;
  double kappa_;
  Eigen::VectorXd k2_;
  Eigen::VectorXd V_;
  std::shared_ptr<const Spectrum> spectrum_;
};

// --- overlap scans -----------------------------------------------------------

/// int G_{n,t}(x - y) |f(y)|^2 dy, periodic distance.
inline double envelope_integral(const GridFunction& f, const Coord& x, int n, double t) {
  const Grid& g = f.grid();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    sum += decay_envelope(n, t, g.distance(x, g.coordinate(i))) * std::norm(f[i]);
  return sum * g.cell_volume();
}

struct OverlapRow {
  double t = 0.0;
  double distance = 0.0;
  double lhs_overlap = 0.0;       // |<f, e^{-itT} phi_x>|
  double lhs_diff_overlap = 0.0;  // |<f, (e^{-itT} - Id) phi_x>|
  double rhs_envelope = 0.0;      // int G_{n,t}(x-y) |f(y)|^2 dy
  double ratio = 0.0;             // lhs^2 / (<t>^{1+2 delta} rhs)
};

struct Probe {
  GridFunction f;
  double distance = 0.0;
};

/// Overlaps of probes with the propagated smearing function phi_x; one row
/// per (time, probe), time-major.
inline std::vector<OverlapRow> overlap_scan(const OneBodyOperator& T, const GridFunction& phi, const Coord& x,
                                            const std::vector<Probe>& probes, const std::vector<double>& times,
                                            int n, double delta, Propagation how = {}) {
  std::vector<OverlapRow> rows;
  rows.reserve(probes.size() * times.size());
  for (double t : times) {
    GridFunction psi = T.propagate(phi, t, how);
    GridFunction diff = psi - phi;
    for (const auto& p : probes) {
      OverlapRow row;
      row.t = t;
      row.distance = p.distance;
      row.lhs_overlap = std::abs(inner(p.f, psi));
      row.lhs_diff_overlap = std::abs(inner(p.f, diff));
      row.rhs_envelope = envelope_integral(p.f, x, n, t);
      const double weight = std::pow(japanese_bracket(t), 1.0 + 2.0 * delta) * row.rhs_envelope;
      row.ratio = weight > 0.0 ? row.lhs_overlap * row.lhs_overlap / weight : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

/// Least-squares slope of log y against log x over points with y > floor.
/// Returns NaN with fewer than three admissible points.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double floor = 0.0) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(y[i] > floor) || !(x[i] > 0.0)) continue;
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++m;
  }
  if (m < 3) return std::nan("");
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace lightcone
