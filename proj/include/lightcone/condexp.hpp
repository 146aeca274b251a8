#pragma once

// Kraus-representation conditional expectation onto the algebra of the
// retained modes, the quasi-free tracial state, and the dyadic mode-budget
// (PPT) construction.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "lightcone/bounds.hpp"
#include "lightcone/commutator.hpp"
#include "lightcone/error.hpp"
#include "lightcone/fock.hpp"

namespace lightcone {

/// u^(0) = Id, u^(1) = a*_n + a_n, u^(2) = a*_n - a_n, u^(3) = Id - 2 a*_n a_n.
inline std::array<FockOperator, 4> kraus_unitaries(int n, int modes) {
  FockOperator a = annihilator(n, modes), ad = a.adjoint(), I = FockOperator::identity(modes);
  return {I, ad + a, ad - a, I - cplx(2.0) * (ad * a)};
}

/// A -> 1/4 sum_alpha u^(alpha)* A u^(alpha) for one mode.
inline FockOperator average_mode(const FockOperator& A, int n) {
  auto u = kraus_unitaries(n, A.modes());
  SparseOp sum = A.matrix();
  for (int k = 1; k < 4; ++k) sum += u[size_t(k)].matrix().adjoint() * A.matrix() * u[size_t(k)].matrix();
  return FockOperator(A.modes(), SparseOp(0.25 * sum));
}

struct PptTier {
  int i = 0;
  double floor = 0.0;   // required distance from X
  int budget = 0;       // floor(C_J 2^{i n / 4})
  std::vector<int> mode_ids;
};

struct KrausPlan {
  int modes = 0;
  std::vector<int> complement;  // ordered: tier-major, then mode index
  std::vector<int> retained;    // modes meeting X
  int N = 0;                    // truncation depth
  std::vector<PptTier> tiers;
  double C_X = 1.0;
  double C_J = 1.0;
  int n = 2;

  /// Plan averaging over the given complement modes in order.
  static KrausPlan over(int modes, std::vector<int> complement, int N = -1) {
    KrausPlan p;
    p.modes = modes;
    std::vector<bool> in(size_t(modes), false);
    for (int k : complement) {
      require(k >= 0 && k < modes, errc::parameter, "complement mode out of range");
      in[size_t(k)] = true;
    }
    for (int k = 0; k < modes; ++k)
      if (!in[size_t(k)]) p.retained.push_back(k);
    p.N = N < 0 ? int(complement.size()) : N;
    p.complement = std::move(complement);
    return p;
  }
};

/// E^N: N sequential single-mode averages over the first N complement modes.
/// Equivalent to the 4^N-term Kraus sum because the conjugations form a group.
inline FockOperator conditional_expectation(const FockOperator& A, const KrausPlan& plan) {
  require(A.modes() == plan.modes, errc::shape, "operator and plan have different mode counts");
  require(plan.N >= 0 && plan.N <= int(plan.complement.size()), errc::truncation,
          "truncation depth exceeds the number of complement modes");
  FockOperator out = A;
  for (int k = 0; k < plan.N; ++k) out = average_mode(out, plan.complement[size_t(k)]);
  return out;
}

/// Literal 4^{-N} sum_alpha u(alpha)* A u(alpha); cost 4^N, reference path only.
inline FockOperator conditional_expectation_literal(const FockOperator& A, const KrausPlan& plan) {
  require(plan.N >= 0 && plan.N <= int(plan.complement.size()), errc::truncation,
          "truncation depth exceeds the number of complement modes");
  require(plan.N <= 8, errc::capacity, "literal Kraus sum limited to N <= 8");
  std::vector<std::array<FockOperator, 4>> u;
  for (int k = 0; k < plan.N; ++k) u.push_back(kraus_unitaries(plan.complement[size_t(k)], A.modes()));
  SparseOp sum(A.dim(), A.dim());
  const long total = 1L << (2 * plan.N);
  for (long code = 0; code < total; ++code) {
    SparseOp U = FockOperator::identity(A.modes()).matrix();
    for (int k = 0; k < plan.N; ++k) U = SparseOp(U * u[size_t(k)][size_t((code >> (2 * k)) & 3)].matrix());
    sum += SparseOp(U.adjoint() * A.matrix() * U);
  }
  return FockOperator(A.modes(), SparseOp(sum / double(total)));
}

/// Smallest N' with E^{N'}(A) = E^{N}(A) for all N' <= N <= |complement| (to tol).
inline int stabilization_index(const FockOperator& A, const KrausPlan& plan, double tol = 1e-12) {
  std::vector<FockOperator> seq{A};
  for (int k : plan.complement) seq.push_back(average_mode(seq.back(), k));
  int idx = int(plan.complement.size());
  while (idx > 0 && (seq[size_t(idx - 1)] - seq.back()).max_abs() <= tol) --idx;
  return idx;
}

// --- tracial state ---------------------------------------------------------------

struct MonomialFactor {
  int mode = 0;
  bool dagger = false;
};

inline FockOperator monomial_operator(const std::vector<MonomialFactor>& m, int modes) {
  FockOperator out = FockOperator::identity(modes);
  for (const auto& f : m) out = out * (f.dagger ? creator(f.mode, modes) : annihilator(f.mode, modes));
  return out;
}

/// omega^tr(a*_{i_m}..a*_{i_1} a_{j_1}..a_{j_n}): 1/2^n when the index sets
/// agree (with the sign of the reordering), 0 otherwise.
inline double tracial_state(const std::vector<MonomialFactor>& m) {
  std::vector<int> cre, ann;
  bool seen_annihilator = false;
  for (const auto& f : m) {
    require(f.mode >= 0, errc::parameter, "malformed monomial: negative mode index");
    if (f.dagger) {
      require(!seen_annihilator, errc::parameter, "malformed monomial: not normal ordered");
      cre.push_back(f.mode);
    } else {
      seen_annihilator = true;
      ann.push_back(f.mode);
    }
  }
  auto distinct = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  require(distinct(cre) && distinct(ann), errc::parameter, "malformed monomial: repeated mode");
  if (cre.size() != ann.size()) return 0.0;
  std::vector<int> a = cre, b = ann;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) return 0.0;
  // Matched pattern reads a*_{i_m}..a*_{i_1} a_{i_1}..a_{i_m}; count the
  // transpositions taking ann to reverse(cre).
  std::vector<int> target(cre.rbegin(), cre.rend());
  std::vector<int> cur = ann;
  int swaps = 0;
  for (size_t k = 0; k < cur.size(); ++k) {
    size_t p = size_t(std::find(cur.begin() + long(k), cur.end(), target[k]) - cur.begin());
    for (size_t q = p; q > k; --q) std::swap(cur[q], cur[q - 1]), ++swaps;
  }
  return (swaps % 2 ? -1.0 : 1.0) / std::pow(2.0, double(cre.size()));
}

/// Normalized trace on the 2^M space (the finite-mode tracial state).
inline cplx normalized_trace(const FockOperator& A) {
  cplx s = 0.0;
  for (Eigen::Index k = 0; k < A.matrix().outerSize(); ++k)
    for (SparseOp::InnerIterator it(A.matrix(), k); it; ++it)
      if (it.row() == it.col()) s += it.value();
  return s / double(A.dim());
}

// --- Tomiyama property -------------------------------------------------------------

/// ||E(BAC) - B E(A) C|| for even A and even B, C on the retained modes.
inline double tomiyama_check(const FockOperator& A, const FockOperator& B, const FockOperator& C,
                             const KrausPlan& plan) {
  require(A.parity() == Parity::even && B.parity() == Parity::even && C.parity() == Parity::even,
          errc::hypothesis, "Tomiyama property needs even operators");
  for (const FockOperator* X : {&B, &C})
    require((conditional_expectation(*X, plan) - *X).max_abs() <= 1e-12 * std::max(1.0, X->max_abs()),
            errc::hypothesis, "B and C must live on the retained modes");
  return operator_norm(conditional_expectation(B * A * C, plan) - B * conditional_expectation(A, plan) * C);
}

/// Same residual without the parity checks (used to record odd counterexamples).
inline double tomiyama_residual(const FockOperator& A, const FockOperator& B, const FockOperator& C,
                                const KrausPlan& plan) {
  return operator_norm(conditional_expectation(B * A * C, plan) - B * conditional_expectation(A, plan) * C);
}

// --- PPT plan ----------------------------------------------------------------------

/// Distance between the mask X and the numerical support of f.
inline double support_distance(const std::vector<bool>& X, const GridFunction& f) {
  const Grid& g = f.grid();
  require(X.size() == size_t(g.size()), errc::shape, "mask size does not match grid");
  const double cut = support_tol * std::max(1.0, f.sup_norm());
  std::vector<Coord> xs, fs;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (X[size_t(i)]) xs.push_back(g.coordinate(i));
    if (std::abs(f[i]) > cut) fs.push_back(g.coordinate(i));
  }
  require(!xs.empty(), errc::parameter, "region X is empty");
  double d = std::numeric_limits<double>::infinity();
  for (const auto& a : fs)
    for (const auto& b : xs) d = std::min(d, g.distance(a, b));
  return d;
}

inline int tier_budget(int i, double C_J, int n) { return int(std::floor(C_J * std::pow(2.0, i * n / 4.0) + 1e-12)); }

inline double tier_floor(int i, double C_X) { return i == 0 ? 0.0 : C_X * std::pow(2.0, i); }

/// Assigns modes outside X to dyadic tiers. Modes whose tag declares a tier
/// must meet that tier's floor; untagged modes take the largest admissible i.
/// Tiers over budget raise a plan error naming the tier.
inline KrausPlan build_ppt_plan(const std::vector<bool>& X, const ModeBasis& basis, double C_X, double C_J, int n) {
  require(C_X > 0.0 && C_J >= 0.0 && n >= 1, errc::parameter, "PPT needs C_X > 0, C_J >= 0, n >= 1");
  KrausPlan plan;
  plan.modes = basis.size();
  plan.C_X = C_X;
  plan.C_J = C_J;
  plan.n = n;
  std::map<int, std::vector<int>> tiers;
  for (int k = 0; k < basis.size(); ++k) {
    const double d = support_distance(X, basis.mode(k));
    if (d == 0.0) {
      plan.retained.push_back(k);
      continue;
    }
    int i = basis.tag(k).tier;
    if (i >= 0) {
      require(d >= tier_floor(i, C_X), errc::plan,
              "mode " + std::to_string(k) + " at distance " + std::to_string(d) + " violates the floor of tier " +
                  std::to_string(i));
    } else {
      i = 0;
      while (d >= tier_floor(i + 1, C_X)) ++i;
    }
    tiers[i].push_back(k);
  }
  std::string over;
  for (auto& [i, ids] : tiers) {
    PptTier t{i, tier_floor(i, C_X), tier_budget(i, C_J, n), ids};
    if (int(ids.size()) > t.budget)
      over += " tier " + std::to_string(i) + " (" + std::to_string(ids.size()) + " > " + std::to_string(t.budget) + ")";
    for (int k : ids) plan.complement.push_back(k);
    plan.tiers.push_back(std::move(t));
  }
  require(over.empty(), errc::plan, "mode budget exceeded:" + over);
  plan.N = int(plan.complement.size());
  return plan;
}

// --- localization error --------------------------------------------------------------

struct LocalizationResult {
  double lhs = 0.0;
  double envelope = 0.0;
  double ratio = 0.0;  // lhs / envelope (0 when both vanish)
};

/// ||tau_t(A) - E_X(tau_t(A))|| for A = prod a^#(g_j) with every g_j on the
/// retained modes, against C_J (Xi_mb(t)^{1/2} + 2 sqrt(C_ob1) |t| <t>^{1/2+delta}) (<t>/C_X)^n / n.
inline LocalizationResult localization_error(const Evolution& ev, const std::vector<Generator>& A, const KrausPlan& plan,
                                             double t, const BoundParams& P, int d) {
  require(A.size() > 1 && A.size() % 2 == 0, errc::hypothesis,
          "observable needs an even number (> 1) of factors; E kills odd operators");
  for (const auto& g : A) {
    require(int(g.c.size()) == plan.modes, errc::shape, "generator and plan have different mode counts");
    for (int k : plan.complement)
      require(std::abs(g.c[k]) <= 1e-12 * std::max(1.0, g.c.norm()), errc::hypothesis,
              "observable is not supported in X");
  }
  FockOperator op = FockOperator::identity(plan.modes);
  for (const auto& g : A) op = op * g.op();
  FockOperator tau = ev.heisenberg(op, t);
  LocalizationResult r;
  r.lhs = operator_norm(tau - conditional_expectation(tau, plan));
  const double bt = bracket(t);
  r.envelope = P.C_ob1 > 0.0 ? plan.C_J *
                                   (std::sqrt(xi_mb(t, P, d)) + 2.0 * std::sqrt(P.C_ob1) * std::abs(t) *
                                                                    std::pow(bt, 0.5 + P.delta)) *
                                   std::pow(bt / plan.C_X, plan.n) / plan.n
                             : 0.0;
  r.ratio = r.envelope > 0.0 ? r.lhs / r.envelope : 0.0;
  return r;
}

}  // namespace lightcone
