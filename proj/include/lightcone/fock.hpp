#pragma once

// Mode-truncated fermionic Fock space in the Jordan-Wigner representation:
// CAR generators, second quantization, the smeared Hamiltonian H_Lambda,
// Heisenberg dynamics and the quantities built on it.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lightcone/error.hpp"
#include "lightcone/grid.hpp"
#include "lightcone/onebody.hpp"

namespace lightcone {

inline constexpr int max_modes = 14;
inline constexpr Eigen::Index dense_block_cap = 4096;

using SparseOp = Eigen::SparseMatrix<cplx>;

enum class Parity { even, odd, mixed };

inline const char* to_string(Parity p) {
  switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    case Parity::mixed: return "mixed";
  }
  return "mixed";
}

inline int popcount(Eigen::Index s) { return std::popcount(static_cast<unsigned long long>(s)); }

class FockOperator {
 public:
  FockOperator() = default;
  FockOperator(int modes, SparseOp m) : modes_(modes), m_(std::move(m)) {
    require(modes >= 1 && modes <= max_modes, errc::capacity, "mode count must be in [1, 14]");
    require(m_.rows() == dim() && m_.cols() == dim(), errc::shape, "Fock operator must be 2^M x 2^M");
    m_.makeCompressed();
    parity_ = classify();
  }

  static FockOperator identity(int modes) {
    SparseOp I(Eigen::Index(1) << modes, Eigen::Index(1) << modes);
    I.setIdentity();
    return FockOperator(modes, std::move(I));
  }
  static FockOperator zero(int modes) {
    return FockOperator(modes, SparseOp(Eigen::Index(1) << modes, Eigen::Index(1) << modes));
  }
  static FockOperator from_dense(int modes, const Eigen::MatrixXcd& d) {
    return FockOperator(modes, d.sparseView(0.0, 0.0));
  }

  int modes() const { return modes_; }
  Eigen::Index dim() const { return Eigen::Index(1) << modes_; }
  const SparseOp& matrix() const { return m_; }
  Parity parity() const { return parity_; }
  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(m_); }

  /// Largest entry modulus; exact for integer-structured matrices.
  double max_abs() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < m_.outerSize(); ++k)
      for (SparseOp::InnerIterator it(m_, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }

  FockOperator adjoint() const { return FockOperator(modes_, SparseOp(m_.adjoint())); }

  friend FockOperator operator+(const FockOperator& a, const FockOperator& b) {
    check_same(a, b);
    return FockOperator(a.modes_, SparseOp(a.m_ + b.m_));
  }
  friend FockOperator operator-(const FockOperator& a, const FockOperator& b) {
    check_same(a, b);
    return FockOperator(a.modes_, SparseOp(a.m_ - b.m_));
  }
  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    check_same(a, b);
    return FockOperator(a.modes_, SparseOp(a.m_ * b.m_));
  }
  friend FockOperator operator*(cplx s, const FockOperator& a) { return FockOperator(a.modes_, SparseOp(s * a.m_)); }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    require(v.size() == dim(), errc::shape, "state dimension mismatch");
    return m_ * v;
  }

 private:
  static void check_same(const FockOperator& a, const FockOperator& b) {
    require(a.modes_ == b.modes_, errc::shape, "Fock operators act on different mode counts");
  }

  // Even operators connect states of equal occupation parity.
  Parity classify() const {
    double even = 0.0, odd = 0.0;
    for (Eigen::Index k = 0; k < m_.outerSize(); ++k)
      for (SparseOp::InnerIterator it(m_, k); it; ++it) {
        double a = std::abs(it.value());
        if ((popcount(it.row()) + popcount(it.col())) % 2 == 0)
          even = std::max(even, a);
        else
          odd = std::max(odd, a);
      }
    const double tol = 1e-12 * std::max(1.0, std::max(even, odd));
    if (odd <= tol) return Parity::even;
    if (even <= tol) return Parity::odd;
    return Parity::mixed;
  }

  int modes_ = 0;
  SparseOp m_;
  Parity parity_ = Parity::even;
};

inline FockOperator anticommutator(const FockOperator& a, const FockOperator& b) { return a * b + b * a; }
inline FockOperator commutator(const FockOperator& a, const FockOperator& b) { return a * b - b * a; }

/// (-1)^N as a diagonal operator.
inline FockOperator parity_operator(int modes) {
  const Eigen::Index D = Eigen::Index(1) << modes;
  std::vector<Eigen::Triplet<cplx>> t;
  for (Eigen::Index s = 0; s < D; ++s) t.emplace_back(s, s, popcount(s) % 2 ? -1.0 : 1.0);
  SparseOp m(D, D);
  m.setFromTriplets(t.begin(), t.end());
  return FockOperator(modes, std::move(m));
}

inline FockOperator number_operator(int modes) {
  const Eigen::Index D = Eigen::Index(1) << modes;
  std::vector<Eigen::Triplet<cplx>> t;
  for (Eigen::Index s = 1; s < D; ++s) t.emplace_back(s, s, double(popcount(s)));
  SparseOp m(D, D);
  m.setFromTriplets(t.begin(), t.end());
  return FockOperator(modes, std::move(m));
}

// --- connected blocks ------------------------------------------------------------

namespace detail {

/// Groups basis states into the connected components of the sparsity graph.
inline std::vector<std::vector<Eigen::Index>> components(const SparseOp& m) {
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), Eigen::Index(0));
  auto find = [&](Eigen::Index x) {
    while (parent[size_t(x)] != x) x = parent[size_t(x)] = parent[size_t(parent[size_t(x)])];
    return x;
  };
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseOp::InnerIterator it(m, k); it; ++it) {
      Eigen::Index a = find(it.row()), b = find(it.col());
      if (a != b) parent[size_t(std::max(a, b))] = std::min(a, b);
    }
  std::map<Eigen::Index, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<Eigen::Index>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

inline Eigen::MatrixXcd gather(const SparseOp& m, const std::vector<Eigen::Index>& rows,
                               const std::vector<Eigen::Index>& cols, const std::vector<Eigen::Index>& pos) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c)
    for (SparseOp::InnerIterator it(m, cols[c]); it; ++it) {
      Eigen::Index r = pos[size_t(it.row())];
      if (r >= 0 && r < out.rows() && rows[size_t(r)] == it.row()) out(r, Eigen::Index(c)) = it.value();
    }
  return out;
}

}  // namespace detail

/// Largest singular value, from the top eigenvalue of A^*A on each connected
/// block; blocks beyond the dense cap fall back to power iteration (tol 1e-8).
inline double operator_norm(const FockOperator& A) {
  SparseOp G = A.matrix().adjoint() * A.matrix();
  if (G.nonZeros() == 0) return 0.0;
  double top = 0.0;
  std::vector<Eigen::Index> pos(size_t(G.rows()), -1);
  for (const auto& comp : detail::components(G)) {
    for (size_t i = 0; i < comp.size(); ++i) pos[size_t(comp[i])] = Eigen::Index(i);
    if (comp.size() == 1) {
      top = std::max(top, std::abs(G.coeff(comp[0], comp[0])));
      continue;
    }
    if (Eigen::Index(comp.size()) <= dense_block_cap) {
      Eigen::MatrixXcd B = detail::gather(G, comp, comp, pos);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(B, Eigen::EigenvaluesOnly);
      top = std::max(top, es.eigenvalues().maxCoeff());
    } else {
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(G.rows());
      for (auto i : comp) v[i] = 1.0 + 0.1 * double(i % 7);
      v.normalize();
      double lam = 0.0;
      for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXcd w = G * v;
        double next = std::real(v.dot(w));
        double nw = w.norm();
        if (nw == 0.0) break;
        v = w / nw;
        bool done = std::abs(next - lam) <= 1e-8 * std::abs(next);
        lam = next;
        if (done) break;
      }
      top = std::max(top, lam);
    }
  }
  return std::sqrt(std::max(0.0, top));
}

/// sqrt(||A||_1 ||A||_inf): a cheap rigorous upper bound on the operator norm.
inline double norm_upper_bound(const FockOperator& A) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.dim()), cols = Eigen::VectorXd::Zero(A.dim());
  const SparseOp& m = A.matrix();
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseOp::InnerIterator it(m, k); it; ++it) {
      rows[it.row()] += std::abs(it.value());
      cols[it.col()] += std::abs(it.value());
    }
  return std::sqrt(rows.maxCoeff() * cols.maxCoeff());
}

/// ||A - c Id|| for a scalar c.
inline double distance_to_scalar(const FockOperator& A, cplx c) {
  return operator_norm(A - c * FockOperator::identity(A.modes()));
}

// --- CAR generators --------------------------------------------------------------

/// Jordan-Wigner a_j: parity string on modes < j, lowering at j.
inline FockOperator annihilator(int j, int modes) {
  require(modes >= 1 && modes <= max_modes, errc::capacity, "mode count must be in [1, 14]");
  require(j >= 0 && j < modes, errc::parameter, "mode index out of range");
  const Eigen::Index D = Eigen::Index(1) << modes;
  const Eigen::Index bit = Eigen::Index(1) << j;
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(size_t(D / 2));
  for (Eigen::Index s = 0; s < D; ++s)
    if (s & bit) t.emplace_back(s ^ bit, s, popcount(s & (bit - 1)) % 2 ? -1.0 : 1.0);
  SparseOp m(D, D);
  m.setFromTriplets(t.begin(), t.end());
  return FockOperator(modes, std::move(m));
}

inline FockOperator creator(int j, int modes) { return annihilator(j, modes).adjoint(); }

/// sum_j conj(c_j) a_j, i.e. a(f) for f with mode coefficients c.
inline FockOperator a_of_coefficients(const Eigen::VectorXcd& c) {
  const int M = int(c.size());
  FockOperator out = FockOperator::zero(M);
  for (int j = 0; j < M; ++j)
    if (c[j] != 0.0) out = out + std::conj(c[j]) * annihilator(j, M);
  return out;
}

inline FockOperator adag_of_coefficients(const Eigen::VectorXcd& c) { return a_of_coefficients(c).adjoint(); }

/// sum_{jk} A_jk a*_j a_k.
inline FockOperator second_quantize(const Eigen::MatrixXcd& A) {
  require(A.rows() == A.cols(), errc::shape, "one-body matrix must be square");
  const int M = int(A.rows());
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  require((A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale, errc::model, "one-body matrix must be Hermitian");
  std::vector<FockOperator> a;
  for (int j = 0; j < M; ++j) a.push_back(annihilator(j, M));
  FockOperator out = FockOperator::zero(M);
  for (int j = 0; j < M; ++j)
    for (int k = 0; k < M; ++k)
      if (A(j, k) != 0.0) out = out + A(j, k) * (a[size_t(j)].adjoint() * a[size_t(k)]);
  return out;
}

// --- mode basis ------------------------------------------------------------------

struct ModeTag {
  Coord center{0.0, 0.0};
  int tier = -1;  // PPT tier, -1 when untiered
  std::string label;
};

class ModeBasis {
 public:
  ModeBasis() = default;

  /// Orthonormalizes the seeds in order (modified Gram-Schmidt, two passes).
  ModeBasis(const Grid& grid, std::vector<GridFunction> seeds, std::vector<ModeTag> tags = {})
      : grid_(grid), tags_(std::move(tags)) {
    const int M = int(seeds.size());
    require(M >= 2, errc::parameter, "a mode basis needs at least two modes");
    require(M <= max_modes, errc::capacity, "mode count exceeds 14");
    if (tags_.empty()) tags_.resize(size_t(M));
    require(int(tags_.size()) == M, errc::shape, "one tag per mode");
    for (int j = 0; j < M; ++j) {
      require(seeds[size_t(j)].grid() == grid, errc::shape, "mode seed lives on a different grid");
      Eigen::VectorXcd v = seeds[size_t(j)].values();
      const double n0 = std::sqrt(v.squaredNorm() * grid.cell_volume());
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& m : modes_) v -= m.values() * (m.values().dot(v) * grid.cell_volume());
      const double n = std::sqrt(v.squaredNorm() * grid.cell_volume());
      require(n > 1e-8 * std::max(n0, 1e-300), errc::model, "mode seeds are linearly dependent");
      modes_.emplace_back(grid, v / n);
    }
    require((gram() - Eigen::MatrixXcd::Identity(M, M)).cwiseAbs().maxCoeff() <= 1e-10, errc::numerical,
            "mode basis failed to orthonormalize");
  }

  /// Gaussians of width sigma at the given centers (l2-normalized seeds).
  static ModeBasis gaussian(const Grid& grid, const std::vector<Coord>& centers, double sigma) {
    std::vector<GridFunction> seeds;
    std::vector<ModeTag> tags;
    for (const auto& c : centers) {
      seeds.push_back(make_gaussian(grid, sigma, c, Normalization::l2));
      tags.push_back({c, -1, "gaussian"});
    }
    return ModeBasis(grid, std::move(seeds), std::move(tags));
  }

  /// Normalized indicators of axis-aligned cubes of side `width` centered at
  /// the given points. Disjoint cubes give an exactly orthonormal set.
  static ModeBasis blocks(const Grid& grid, const std::vector<Coord>& centers, double width) {
    std::vector<GridFunction> seeds;
    std::vector<ModeTag> tags;
    for (const auto& c : centers) {
      auto f = GridFunction::sample(grid, [&](const Coord& y) {
        Coord d = grid.periodic_delta(y, c);
        bool in = std::abs(d[0]) < 0.5 * width + 1e-12 && (grid.dim() == 1 || std::abs(d[1]) < 0.5 * width + 1e-12);
        return cplx(in ? 1.0 : 0.0);
      });
      require(f.l2_norm() > 0.0, errc::resolution, "block narrower than a grid cell");
      seeds.push_back(f.normalized());
      tags.push_back({c, -1, "block"});
    }
    return ModeBasis(grid, std::move(seeds), std::move(tags));
  }

  /// Smooth compactly supported bumps exp(1 - 1/(1 - (r/radius)^2)).
  static ModeBasis bumps(const Grid& grid, const std::vector<Coord>& centers, double radius) {
    std::vector<GridFunction> seeds;
    std::vector<ModeTag> tags;
    for (const auto& c : centers) {
      auto f = GridFunction::sample(grid, [&](const Coord& y) {
        double s = grid.distance(y, c) / radius;
        return cplx(s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0);
      });
      require(f.l2_norm() > 0.0, errc::resolution, "bump narrower than a grid cell");
      seeds.push_back(f.normalized());
      tags.push_back({c, -1, "bump"});
    }
    return ModeBasis(grid, std::move(seeds), std::move(tags));
  }

  int size() const { return int(modes_.size()); }
  const Grid& grid() const { return grid_; }
  const GridFunction& mode(int j) const { return modes_.at(size_t(j)); }
  const ModeTag& tag(int j) const { return tags_.at(size_t(j)); }
  ModeTag& tag(int j) { return tags_.at(size_t(j)); }

  Eigen::MatrixXcd gram() const {
    const int M = size();
    Eigen::MatrixXcd G(M, M);
    for (int j = 0; j < M; ++j)
      for (int k = 0; k < M; ++k) G(j, k) = inner(modes_[size_t(j)], modes_[size_t(k)]);
    return G;
  }

  /// c_j = <m_j, f>.
  Eigen::VectorXcd coefficients(const GridFunction& f) const {
    require(f.grid() == grid_, errc::shape, "function lives on a different grid than the basis");
    Eigen::VectorXcd c(size());
    for (int j = 0; j < size(); ++j) c[j] = inner(modes_[size_t(j)], f);
    return c;
  }

  GridFunction synthesize(const Eigen::VectorXcd& c) const {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(grid_.size());
    for (int j = 0; j < size(); ++j) v += c[j] * modes_[size_t(j)].values();
    return GridFunction(grid_, std::move(v));
  }

  GridFunction project(const GridFunction& f) const { return synthesize(coefficients(f)); }

  /// 1 - ||P f||^2 / ||f||^2.
  double projection_loss(const GridFunction& f) const {
    const double n2 = f.values().squaredNorm() * grid_.cell_volume();
    if (n2 == 0.0) return 0.0;
    return std::max(0.0, 1.0 - coefficients(f).squaredNorm() / n2);
  }

  /// T_jk = <m_j, T m_k>, symmetrized to remove rounding asymmetry.
  Eigen::MatrixXcd one_body_matrix(const OneBodyOperator& T) const {
    const int M = size();
    Eigen::MatrixXcd A(M, M);
    for (int k = 0; k < M; ++k) {
      GridFunction tk = T.apply(modes_[size_t(k)]);
      for (int j = 0; j < M; ++j) A(j, k) = inner(modes_[size_t(j)], tk);
    }
    return 0.5 * (A + A.adjoint());
  }

 private:
  Grid grid_;
  std::vector<GridFunction> modes_;
  std::vector<ModeTag> tags_;
};

inline FockOperator a_of(const GridFunction& f, const ModeBasis& basis) {
  return a_of_coefficients(basis.coefficients(f));
}
inline FockOperator adag_of(const GridFunction& f, const ModeBasis& basis) { return a_of(f, basis).adjoint(); }

// --- the model -------------------------------------------------------------------

struct ModelSpec {
  ModeBasis basis;
  Eigen::MatrixXcd T;                 // one-body matrix in the mode basis
  std::vector<Coord> centers;         // interaction quadrature nodes
  double center_weight = 1.0;         // quadrature weight per node
  std::function<double(double)> W;    // radial pair interaction, W(|x-y|)
  double sigma = 1.0;                 // smearing width of phi
  Normalization phi_norm = Normalization::l1;
  std::vector<bool> lambda;           // region mask on the grid; empty = whole box

  int modes() const { return basis.size(); }

  bool in_lambda(const Coord& x) const {
    if (lambda.empty()) return true;
    const Grid& g = basis.grid();
    Eigen::Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      double d = g.distance(g.coordinate(i), x);
      if (d < bd) bd = d, best = i;
    }
    return lambda[size_t(best)];
  }

  /// Centers that lie inside Lambda.
  std::vector<Coord> active_centers() const {
    std::vector<Coord> out;
    for (const auto& c : centers)
      if (in_lambda(c)) out.push_back(c);
    return out;
  }

  GridFunction phi_at(const Coord& x) const { return make_gaussian(basis.grid(), sigma, x, phi_norm); }
};

struct Hamiltonian {
  FockOperator H;
  double projection_loss = 0.0;  // worst relative out-of-span mass of phi_x
  int centers_used = 0;
  std::vector<std::string> warnings;
};

/// dGamma(T) + sum_{x,y} w_xy a*(phi_x) a*(phi_y) a(phi_y) a(phi_x),
/// w_xy = W(|x-y|) * weight^2, over the centers inside Lambda.
inline Hamiltonian build_H(const ModelSpec& model) {
  Hamiltonian out;
  out.H = second_quantize(model.T);
  const auto centers = model.active_centers();
  out.centers_used = int(centers.size());
  if (centers.empty() || !model.W) {
    out.warnings.push_back("no interaction centers inside Lambda; H = dGamma(T)");
    return out;
  }
  std::vector<FockOperator> a;
  for (const auto& x : centers) {
    GridFunction phi = model.phi_at(x);
    out.projection_loss = std::max(out.projection_loss, model.basis.projection_loss(phi));
    a.push_back(a_of(phi, model.basis));
  }
  const Grid& g = model.basis.grid();
  const double w2 = model.center_weight * model.center_weight;
  SparseOp V(out.H.dim(), out.H.dim());
  for (size_t x = 0; x < centers.size(); ++x)
    for (size_t y = 0; y < centers.size(); ++y) {
      if (x == y) continue;  // a(phi_x)^2 = 0
      const double w = model.W(g.distance(centers[x], centers[y])) * w2;
      if (w == 0.0) continue;
      SparseOp pair = a[y].matrix() * a[x].matrix();
      V += w * SparseOp(pair.adjoint() * pair);
    }
  // Symmetrize away rounding so the operator is Hermitian to machine precision.
  SparseOp Vh = 0.5 * (V + SparseOp(V.adjoint()));
  out.H = out.H + FockOperator(out.H.modes(), Vh);
  return out;
}

// --- dynamics --------------------------------------------------------------------

struct GroundState {
  double energy = 0.0;
  Eigen::VectorXcd psi;
  double gap = 0.0;
  bool degenerate = false;
  double residual = 0.0;
};

/// Eigendecomposition of a Hamiltonian on each connected block of its
/// sparsity pattern (particle-number sectors for number-conserving H).
class Evolution {
 public:
  explicit Evolution(const FockOperator& H) : modes_(H.modes()), H_(H) {
    const SparseOp& m = H.matrix();
    const double scale = std::max(1.0, H.max_abs());
    SparseOp diff = m - SparseOp(m.adjoint());
    double asym = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
      for (SparseOp::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
    require(asym <= 1e-10 * scale, errc::model, "Hamiltonian is not Hermitian");
    block_of_.assign(size_t(H.dim()), -1);
    pos_.assign(size_t(H.dim()), -1);
    for (auto& comp : detail::components(m)) {
      require(Eigen::Index(comp.size()) <= dense_block_cap, errc::capacity,
              "Hamiltonian block exceeds the dense eigendecomposition cap");
      Block b;
      b.states = std::move(comp);
      for (size_t i = 0; i < b.states.size(); ++i) {
        block_of_[size_t(b.states[i])] = int(blocks_.size());
        pos_[size_t(b.states[i])] = Eigen::Index(i);
      }
      Eigen::MatrixXcd Hb = detail::gather(m, b.states, b.states, pos_);
      Hb = 0.5 * (Hb + Hb.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Hb);
      require(es.info() == Eigen::Success, errc::numerical, "block eigendecomposition failed");
      b.values = es.eigenvalues();
      b.vectors = es.eigenvectors();
      blocks_.push_back(std::move(b));
    }
  }

  int modes() const { return modes_; }
  Eigen::Index dim() const { return Eigen::Index(1) << modes_; }
  const FockOperator& hamiltonian() const { return H_; }
  int block_count() const { return int(blocks_.size()); }

  /// fn(H) v.
  template <class Fn>
  Eigen::VectorXcd apply_function(const Eigen::VectorXcd& v, Fn&& fn) const {
    require(v.size() == dim(), errc::shape, "state dimension mismatch");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim());
    for (const auto& b : blocks_) {
      Eigen::VectorXcd vb(Eigen::Index(b.states.size()));
      for (size_t i = 0; i < b.states.size(); ++i) vb[Eigen::Index(i)] = v[b.states[i]];
      Eigen::VectorXcd c = b.vectors.adjoint() * vb;
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= fn(b.values[i]);
      Eigen::VectorXcd r = b.vectors * c;
      for (size_t i = 0; i < b.states.size(); ++i) out[b.states[i]] = r[Eigen::Index(i)];
    }
    return out;
  }

  /// e^{-itH} v.
  Eigen::VectorXcd evolve(const Eigen::VectorXcd& v, double t) const {
    return apply_function(v, [t](double l) { return std::exp(cplx(0.0, -l * t)); });
  }

  /// tau_t(B) = e^{itH} B e^{-itH}.
  FockOperator heisenberg(const FockOperator& B, double t) const {
    require(B.modes() == modes_, errc::shape, "operator and Hamiltonian act on different mode counts");
    if (t == 0.0) return B;
    std::vector<Eigen::MatrixXcd> U(blocks_.size());
    auto unitary = [&](int k) -> const Eigen::MatrixXcd& {
      if (U[size_t(k)].size() == 0) {
        const Block& b = blocks_[size_t(k)];
        Eigen::VectorXcd ph = (b.values.cast<cplx>() * cplx(0.0, t)).array().exp();
        U[size_t(k)] = b.vectors * ph.asDiagonal() * b.vectors.adjoint();
      }
      return U[size_t(k)];
    };
    // Nonzero block pairs of B.
    std::map<std::pair<int, int>, bool> pairs;
    const SparseOp& m = B.matrix();
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
      for (SparseOp::InnerIterator it(m, k); it; ++it) pairs[{block_of_[size_t(it.row())], block_of_[size_t(it.col())]}] = true;
    std::vector<Eigen::Triplet<cplx>> trip;
    for (const auto& [key, unused] : pairs) {
      const Block& r = blocks_[size_t(key.first)];
      const Block& c = blocks_[size_t(key.second)];
      Eigen::MatrixXcd Bb = detail::gather(m, r.states, c.states, pos_);
      Eigen::MatrixXcd out = unitary(key.first) * Bb * unitary(key.second).adjoint();
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
          if (out(i, j) != 0.0) trip.emplace_back(r.states[size_t(i)], c.states[size_t(j)], out(i, j));
    }
    SparseOp res(dim(), dim());
    res.setFromTriplets(trip.begin(), trip.end());
    return FockOperator(modes_, std::move(res));
  }

  /// Lowest eigenpair over all blocks and the gap to the next eigenvalue.
  GroundState ground_state(double degeneracy_tol = 1e-9) const {
    std::vector<std::pair<double, std::pair<int, Eigen::Index>>> low;
    for (size_t k = 0; k < blocks_.size(); ++k)
      for (Eigen::Index i = 0; i < std::min<Eigen::Index>(2, blocks_[k].values.size()); ++i)
        low.push_back({blocks_[k].values[i], {int(k), i}});
    std::sort(low.begin(), low.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    GroundState gs;
    gs.energy = low[0].first;
    gs.gap = low.size() > 1 ? low[1].first - low[0].first : std::numeric_limits<double>::infinity();
    gs.degenerate = gs.gap < degeneracy_tol;
    const Block& b = blocks_[size_t(low[0].second.first)];
    gs.psi = Eigen::VectorXcd::Zero(dim());
    for (size_t i = 0; i < b.states.size(); ++i) gs.psi[b.states[i]] = b.vectors(Eigen::Index(i), low[0].second.second);
    gs.residual = (H_.matrix() * gs.psi - gs.energy * gs.psi).norm();
    return gs;
  }

 private:
  struct Block {
    std::vector<Eigen::Index> states;
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
  };

  int modes_ = 0;
  FockOperator H_;
  std::vector<Block> blocks_;
  std::vector<int> block_of_;
  std::vector<Eigen::Index> pos_;
};

inline FockOperator heisenberg(const FockOperator& B, const FockOperator& H, double t) {
  require(B.modes() == H.modes(), errc::shape, "operator and Hamiltonian act on different mode counts");
  return Evolution(H).heisenberg(B, t);
}

/// F_t = ||{tau_t(a(f)) - tau^0_t(a(f)), a*(g)}|| + ||{tau_t(a*(f)), a*(g)}||.
inline double F_t(const Evolution& full, const Evolution& free, const FockOperator& a_f, const FockOperator& adag_g,
                  double t) {
  if (t == 0.0) return operator_norm(anticommutator(a_f.adjoint(), adag_g));
  FockOperator tf = full.heisenberg(a_f, t);
  FockOperator t0 = free.heisenberg(a_f, t);
  return operator_norm(anticommutator(tf - t0, adag_g)) + operator_norm(anticommutator(tf.adjoint(), adag_g));
}

/// e^{b E} <psi0, A e^{-bH} B psi0>, evaluated with the shifted exponent.
inline cplx clustering_probe(const Evolution& ev, const GroundState& gs, const FockOperator& A, const FockOperator& B,
                             double b) {
  require(!gs.degenerate, errc::hypothesis, "ground state is degenerate; clustering needs a gap");
  require(b >= 0.0 && std::isfinite(b), errc::parameter, "imaginary time must be non-negative");
  require(b * gs.gap <= 50.0, errc::parameter, "overflow guard: b * gap must not exceed 50");
  Eigen::VectorXcd v = B.apply(gs.psi);
  const double E = gs.energy;
  v = ev.apply_function(v, [b, E](double l) { return cplx(std::exp(-b * (l - E))); });
  return gs.psi.dot(A.apply(v));
}

struct VolumeRow {
  double t = 0.0;
  int k = 0;  // difference between Lambda_{k+1} and Lambda_k (k from 1)
  double difference = 0.0;
};

/// ||tau_t^{Lambda_{k+1}}(a(f)) - tau_t^{Lambda_k}(a(f))|| over nested masks.
inline std::vector<VolumeRow> volume_convergence(const std::vector<ModelSpec>& models, const GridFunction& f,
                                                 const std::vector<double>& ts) {
  require(models.size() >= 2, errc::config, "volume convergence needs at least two regions");
  for (size_t k = 1; k < models.size(); ++k) {
    const auto& a = models[k - 1].lambda;
    const auto& b = models[k].lambda;
    require(models[k].modes() == models[0].modes() && models[k].basis.grid() == models[0].basis.grid(),
            errc::config, "all regions must share the mode basis");
    require((models[k].T - models[0].T).cwiseAbs().maxCoeff() == 0.0, errc::config,
            "all regions must share the one-body matrix");
    if (b.empty()) continue;
    require(!a.empty() && a.size() == b.size(), errc::config, "regions must be nested");
    for (size_t i = 0; i < a.size(); ++i) require(!a[i] || b[i], errc::config, "regions must be nested");
  }
  FockOperator af = a_of(f, models[0].basis);
  std::vector<Evolution> ev;
  for (const auto& m : models) ev.emplace_back(build_H(m).H);
  std::vector<VolumeRow> rows;
  for (double t : ts) {
    std::vector<FockOperator> tau;
    for (const auto& e : ev) tau.push_back(e.heisenberg(af, t));
    for (size_t k = 0; k + 1 < tau.size(); ++k) rows.push_back({t, int(k) + 1, operator_norm(tau[k + 1] - tau[k])});
  }
  return rows;
}

}  // namespace lightcone
