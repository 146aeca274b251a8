#pragma once

// Uniform periodic grids in d = 1, 2 and complex functions sampled on them.
//
// Coordinates of axis index i are x_i = -L/2 + i*h, so the origin sits at
// index P/2. All norms and inner products carry the Riemann weight h^d.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lightcone/error.hpp"

namespace lightcone {

using cplx = std::complex<double>;
using Coord = std::array<double, 2>;

/// Numerical support threshold, relative to the sup norm of a function.
inline constexpr double support_tol = 1e-14;

class Grid {
 public:
  Grid() = default;
  Grid(int dimension, int points_per_axis, double length)
      : dim_(dimension), points_(points_per_axis), length_(length) {
    require(dim_ == 1 || dim_ == 2, errc::parameter, "grid dimension must be 1 or 2");
    require(points_ >= 2 && (points_ & (points_ - 1)) == 0, errc::parameter,
            "points per axis must be a power of two");
    require(length_ > 0.0 && std::isfinite(length_), errc::parameter, "box length must be positive");
    require(size() >= 8, errc::parameter, "grid needs at least 8 points");
  }

  int dim() const { return dim_; }
  int points() const { return points_; }
  double length() const { return length_; }
  double spacing() const { return length_ / points_; }
  double cell_volume() const { return std::pow(spacing(), dim_); }
  Eigen::Index size() const { return dim_ == 1 ? points_ : Eigen::Index(points_) * points_; }

  double axis_coordinate(int i) const { return -0.5 * length_ + i * spacing(); }

  /// Axis indices of a flat index (row-major, axis 0 slowest).
  std::array<int, 2> axis_indices(Eigen::Index flat) const {
    if (dim_ == 1) return {int(flat), 0};
    return {int(flat / points_), int(flat % points_)};
  }

  Eigen::Index flat_index(int i0, int i1 = 0) const {
    auto wrap = [this](int i) { return ((i % points_) + points_) % points_; };
    return dim_ == 1 ? wrap(i0) : Eigen::Index(wrap(i0)) * points_ + wrap(i1);
  }

  Coord coordinate(Eigen::Index flat) const {
    auto [i0, i1] = axis_indices(flat);
    return {axis_coordinate(i0), dim_ == 2 ? axis_coordinate(i1) : 0.0};
  }

  /// Minimal-image difference a - b on the torus, per axis.
  Coord periodic_delta(const Coord& a, const Coord& b) const {
    Coord d{0.0, 0.0};
    for (int k = 0; k < dim_; ++k) {
      double v = std::fmod(a[k] - b[k], length_);
      if (v >= 0.5 * length_) v -= length_;
      if (v < -0.5 * length_) v += length_;
      d[k] = v;
    }
    return d;
  }

  double distance(const Coord& a, const Coord& b) const {
    auto d = periodic_delta(a, b);
    return std::hypot(d[0], d[1]);
  }

  bool contains(const Coord& x) const {
    for (int k = 0; k < dim_; ++k)
      if (x[k] < -0.5 * length_ || x[k] >= 0.5 * length_) return false;
    return true;
  }

  /// Signed grid momentum 2*pi*k/L for axis index k in FFT ordering.
  double axis_momentum(int k) const {
    int kk = k < points_ / 2 ? k : k - points_;
    return 2.0 * std::numbers::pi * kk / length_;
  }

  /// |p|^2 for every flat index in FFT ordering.
  Eigen::VectorXd momentum_squared() const {
    Eigen::VectorXd out(size());
    for (Eigen::Index f = 0; f < size(); ++f) {
      auto [k0, k1] = axis_indices(f);
      double p0 = axis_momentum(k0);
      double p1 = dim_ == 2 ? axis_momentum(k1) : 0.0;
      out[f] = p0 * p0 + p1 * p1;
    }
    return out;
  }

  double max_momentum() const { return std::sqrt(momentum_squared().maxCoeff()); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.points_ == b.points_ && a.length_ == b.length_;
  }

 private:
  int dim_ = 1;
  int points_ = 8;
  double length_ = 1.0;
};

namespace detail {

inline void fft_axes(const Grid& grid, Eigen::VectorXcd& data, bool inverse) {
  static thread_local Eigen::FFT<double> fft;
  const int P = grid.points();
  std::vector<cplx> in(P), out(P);
  auto pass = [&](auto index_of, int lines) {
    for (int line = 0; line < lines; ++line) {
      for (int i = 0; i < P; ++i) in[i] = data[index_of(line, i)];
      if (inverse)
        fft.inv(out, in);
      else
        fft.fwd(out, in);
      for (int i = 0; i < P; ++i) data[index_of(line, i)] = out[i];
    }
  };
  if (grid.dim() == 1) {
    pass([](int, int i) { return Eigen::Index(i); }, 1);
  } else {
    pass([P](int row, int i) { return Eigen::Index(row) * P + i; }, P);
    pass([P](int col, int i) { return Eigen::Index(i) * P + col; }, P);
  }
}

}  // namespace detail

/// Unnormalized forward DFT over every axis.
inline Eigen::VectorXcd dft(const Grid& grid, Eigen::VectorXcd values) {
  detail::fft_axes(grid, values, false);
  return values;
}

/// Inverse of dft (includes the 1/P^d factor).
inline Eigen::VectorXcd idft(const Grid& grid, Eigen::VectorXcd values) {
  detail::fft_axes(grid, values, true);
  return values;
}

class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const Grid& grid) : grid_(grid), values_(Eigen::VectorXcd::Zero(grid.size())) {}
  GridFunction(const Grid& grid, Eigen::VectorXcd values) : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.size(), errc::shape, "value count does not match grid");
  }

  template <class F>
  static GridFunction sample(const Grid& grid, F&& fn) {
    Eigen::VectorXcd v(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) v[i] = fn(grid.coordinate(i));
    return GridFunction(grid, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXcd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  cplx operator[](Eigen::Index i) const { return values_[i]; }

  double l1_norm() const { return values_.cwiseAbs().sum() * grid_.cell_volume(); }
  double l2_norm() const { return std::sqrt(values_.squaredNorm() * grid_.cell_volume()); }
  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }
  cplx integral() const { return values_.sum() * grid_.cell_volume(); }

  /// Numerical support: |v_i| > support_tol * sup norm.
  std::vector<bool> support() const {
    std::vector<bool> mask(size_t(size()), false);
    const double cut = support_tol * sup_norm();
    if (cut == 0.0) return mask;
    for (Eigen::Index i = 0; i < size(); ++i) mask[size_t(i)] = std::abs(values_[i]) > cut;
    return mask;
  }

  GridFunction normalized() const {
    double n = l2_norm();
    require(n > 0.0, errc::parameter, "cannot normalize the zero function");
    return GridFunction(grid_, values_ / n);
  }

  GridFunction conj() const { return GridFunction(grid_, values_.conjugate()); }
  GridFunction abs_squared() const {
    return GridFunction(grid_, values_.cwiseAbs2().cast<cplx>());
  }
  GridFunction abs() const { return GridFunction(grid_, values_.cwiseAbs().cast<cplx>()); }

  /// y -> f(-y), using the periodic image of -y.
  GridFunction reflected() const {
    Eigen::VectorXcd v(size());
    const int P = grid_.points();
    for (Eigen::Index i = 0; i < size(); ++i) {
      auto [i0, i1] = grid_.axis_indices(i);
      v[grid_.flat_index(P - i0, grid_.dim() == 2 ? P - i1 : 0)] = values_[i];
    }
    return GridFunction(grid_, std::move(v));
  }

  GridFunction masked(const std::vector<bool>& mask) const {
    require(mask.size() == size_t(size()), errc::shape, "mask size does not match grid");
    Eigen::VectorXcd v = values_;
    for (Eigen::Index i = 0; i < size(); ++i)
      if (!mask[size_t(i)]) v[i] = 0.0;
    return GridFunction(grid_, std::move(v));
  }

  friend GridFunction operator+(const GridFunction& a, const GridFunction& b) {
    require(a.grid_ == b.grid_, errc::shape, "grid mismatch");
    return GridFunction(a.grid_, a.values_ + b.values_);
  }
  friend GridFunction operator-(const GridFunction& a, const GridFunction& b) {
    require(a.grid_ == b.grid_, errc::shape, "grid mismatch");
    return GridFunction(a.grid_, a.values_ - b.values_);
  }
  friend GridFunction operator*(cplx s, const GridFunction& a) { return GridFunction(a.grid_, s * a.values_); }

 private:
  Grid grid_;
  Eigen::VectorXcd values_;
};

/// <f, g> = sum conj(f) g h^d, antilinear in the first slot.
inline cplx inner(const GridFunction& f, const GridFunction& g) {
  require(f.grid() == g.grid(), errc::shape, "grid mismatch in inner product");
  return f.values().dot(g.values()) * f.grid().cell_volume();
}

/// Pointwise multiplication by a multiplier given in FFT ordering.
inline GridFunction fourier_multiply(const GridFunction& f, const Eigen::VectorXcd& multiplier) {
  require(multiplier.size() == f.size(), errc::shape, "multiplier size mismatch");
  Eigen::VectorXcd k = dft(f.grid(), f.values());
  k.array() *= multiplier.array();
  return GridFunction(f.grid(), idft(f.grid(), std::move(k)));
}

// ---------------------------------------------------------------------------

enum class Normalization { as_printed, l1, l2 };

inline Normalization parse_normalization(const std::string& s) {
  if (s == "as-printed" || s == "as_printed") return Normalization::as_printed;
  if (s == "l1") return Normalization::l1;
  if (s == "l2") return Normalization::l2;
  fail(errc::config, "unknown normalization '" + s + "'");
}

/// Sampled Gaussian smearing profile centered at `center`.
///
/// as_printed uses (pi s^2)^{-d/2} exp(-y^2 / 2 s^2) verbatim; that profile
/// integrates to 2^{d/2}, not 1. l1 and l2 rescale the same shape so the
/// discrete integral, respectively the discrete L2 norm, equals one.
inline GridFunction make_gaussian(const Grid& grid, double sigma, const Coord& center,
                                  Normalization norm = Normalization::l1) {
  require(sigma >= 2.0 * grid.spacing(), errc::resolution,
          "sigma must be at least two grid spacings");
  require(grid.contains(center), errc::parameter, "Gaussian center outside the box");
  const double prefactor = std::pow(std::numbers::pi * sigma * sigma, -0.5 * grid.dim());
  auto g = GridFunction::sample(grid, [&](const Coord& y) {
    double r = grid.distance(y, center);
    return cplx(prefactor * std::exp(-r * r / (2.0 * sigma * sigma)), 0.0);
  });
  switch (norm) {
    case Normalization::as_printed:
      return g;
    case Normalization::l1:
      return GridFunction(grid, g.values() / g.l1_norm());
    case Normalization::l2:
      return g.normalized();
  }
  return g;
}

/// G_{n,t}(r) = 1 ^ (<t>/r)^n with <t> = sqrt(1 + t^2).
inline double decay_envelope(int n, double t, double r) {
  require(n >= 1, errc::parameter, "envelope exponent must be positive");
  require(r >= 0.0, errc::parameter, "envelope distance must be non-negative");
  const double bt = std::sqrt(1.0 + t * t);
  if (r <= bt) return 1.0;
  return std::pow(bt / r, n);
}

inline double japanese_bracket(double t) { return std::sqrt(1.0 + t * t); }

/// Samples y -> G_{n,t}(|y|) on the grid (periodic distance to the origin).
inline GridFunction envelope_profile(const Grid& grid, int n, double t) {
  Coord origin{0.0, 0.0};
  return GridFunction::sample(grid, [&](const Coord& y) {
    return cplx(decay_envelope(n, t, grid.distance(y, origin)), 0.0);
  });
}

/// Splits f into pieces on |y-x| <= 1 and the annuli 2^{k-1} < |y-x| <= 2^k.
/// The pieces are disjoint indicator restrictions, so they sum to f exactly.
inline std::vector<GridFunction> dyadic_decompose(const GridFunction& f, const Coord& x) {
  const Grid& grid = f.grid();
  std::vector<int> shell(size_t(f.size()));
  int max_shell = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    double r = grid.distance(grid.coordinate(i), x);
    int k = 0;
    while (r > std::ldexp(1.0, k)) ++k;
    shell[size_t(i)] = k;
    max_shell = std::max(max_shell, k);
  }
  std::vector<GridFunction> pieces;
  pieces.reserve(size_t(max_shell) + 1);
  for (int k = 0; k <= max_shell; ++k) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i)
      if (shell[size_t(i)] == k) v[i] = f[i];
    pieces.emplace_back(grid, std::move(v));
  }
  return pieces;
}

/// (f*g)(x) = sum_y f(y) g(x-y) h^d on the torus, evaluated spectrally.
inline GridFunction periodic_convolve(const GridFunction& f, const GridFunction& g) {
  require(f.grid() == g.grid(), errc::shape, "convolution operands live on different grids");
  const Grid& grid = f.grid();
  Eigen::VectorXcd a = dft(grid, f.values());
  a.array() *= dft(grid, g.values()).array();
  Eigen::VectorXcd c = idft(grid, std::move(a)) * grid.cell_volume();
  // Cyclic index k corresponds to coordinate x_{k - P/2}; undo that shift.
  Eigen::VectorXcd out(c.size());
  const int half = grid.points() / 2;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    auto [i0, i1] = grid.axis_indices(i);
    out[i] = c[grid.flat_index(i0 + half, grid.dim() == 2 ? i1 + half : 0)];
  }
  return GridFunction(grid, std::move(out));
}

// --- CSV ---------------------------------------------------------------------

inline void write_csv(std::ostream& os, const GridFunction& f) {
  const Grid& g = f.grid();
  os << (g.dim() == 1 ? "i0" : "i0,i1") << ",re,im\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    auto [i0, i1] = g.axis_indices(i);
    os << i0;
    if (g.dim() == 2) os << ',' << i1;
    os << ',' << f[i].real() << ',' << f[i].imag() << '\n';
  }
}

inline GridFunction read_csv(std::istream& is, const Grid& grid) {
  std::string line;
  require(bool(std::getline(is, line)), errc::config, "empty grid function CSV");
  const std::string expected = grid.dim() == 1 ? "i0,re,im" : "i0,i1,re,im";
  require(line == expected, errc::config, "unexpected CSV header '" + line + "'");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(grid.size());
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(int(cells.size()) == grid.dim() + 2, errc::config, "malformed CSV row '" + line + "'");
    int i0 = std::stoi(cells[0]);
    int i1 = grid.dim() == 2 ? std::stoi(cells[1]) : 0;
    require(i0 >= 0 && i0 < grid.points() && i1 >= 0 && i1 < grid.points(), errc::config,
            "CSV index out of range");
    v[grid.flat_index(i0, i1)] = cplx(std::stod(cells[size_t(grid.dim())]), std::stod(cells[size_t(grid.dim()) + 1]));
    ++rows;
  }
  require(rows == grid.size(), errc::config, "CSV row count does not match grid");
  return GridFunction(grid, std::move(v));
}

}  // namespace lightcone
