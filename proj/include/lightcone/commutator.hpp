#pragma once

// Symbolic expansion of [A_1..A_N, B_1..B_M] and {A_1..A_N, B_1..B_M} into
// signed words with a single anticommutator {A_i, B_j} each, by recursive
// application of the product-rule identities
//   [A, B1 B2] = {A, B1} B2 - B1 {A, B2}      {A, B1 B2} = {A, B1} B2 - B1 [A, B2]
//   [A1 A2, B] = A1 {A2, B} - {A1, B} A2      {A1 A2, B} = A1 [A2, B] + {A1, B} A2
//   [A1 A2, B] = A1 [A2, B] + [A1, B] A2
// choosing the split so that every commutator has an even side.

#include <string>
#include <vector>

#include "lightcone/error.hpp"
#include "lightcone/fock.hpp"

namespace lightcone {

enum class BracketKind { commutator, anticommutator };

enum class Side { lhs, rhs };

struct FactorRef {
  Side side = Side::lhs;
  int index = 0;  // 0-based slot on that side
  friend bool operator==(const FactorRef&, const FactorRef&) = default;
};

/// A scalar anchor {A_i, B_j}.
struct Anchor {
  int i = 0;
  int j = 0;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct ExpressionTerm {
  int sign = 1;
  std::vector<Anchor> anchors;
  std::vector<FactorRef> factors;  // ordered, anchor position given by anchor_at
  int anchor_at = 0;               // anchor sits before factors[anchor_at]
};

struct OperatorExpression {
  BracketKind kind = BracketKind::commutator;
  int n_lhs = 0;
  int n_rhs = 0;
  std::vector<ExpressionTerm> terms;

  /// Factors and anchors only reference declared slots.
  bool well_formed() const {
    for (const auto& t : terms) {
      if (t.sign != 1 && t.sign != -1) return false;
      if (t.anchor_at < 0 || t.anchor_at > int(t.factors.size())) return false;
      for (const auto& f : t.factors)
        if (f.index < 0 || f.index >= (f.side == Side::lhs ? n_lhs : n_rhs)) return false;
      for (const auto& a : t.anchors)
        if (a.i < 0 || a.i >= n_lhs || a.j < 0 || a.j >= n_rhs) return false;
    }
    return true;
  }

  std::string to_string() const {
    std::string out;
    for (const auto& t : terms) {
      out += t.sign > 0 ? " + " : " - ";
      for (size_t k = 0; k <= t.factors.size(); ++k) {
        if (int(k) == t.anchor_at)
          for (const auto& a : t.anchors) out += "{a" + std::to_string(a.i + 1) + ",b" + std::to_string(a.j + 1) + "}";
        if (k < t.factors.size())
          out += (t.factors[k].side == Side::lhs ? "a" : "b") + std::to_string(t.factors[k].index + 1);
      }
    }
    return out;
  }
};

namespace detail {

using Word = std::vector<FactorRef>;

inline Word slice(const Word& w, size_t from, size_t to) { return Word(w.begin() + long(from), w.begin() + long(to)); }

inline Word cat(Word a, const Word& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Appends prefix * bracket(L, R) * suffix, expanded, with the given sign.
inline void expand(BracketKind kind, const Word& L, const Word& R, int sign, const Word& prefix, const Word& suffix,
                   std::vector<ExpressionTerm>& out) {
  const size_t n = L.size(), m = R.size();
  if (n == 1 && m == 1) {
    require(kind == BracketKind::anticommutator, errc::hypothesis,
            "commutator of two single generators has no anticommutator form");
    ExpressionTerm t;
    t.sign = sign;
    t.anchors.push_back({L[0].index, R[0].index});
    t.anchor_at = int(prefix.size());
    t.factors = cat(prefix, suffix);
    out.push_back(std::move(t));
    return;
  }
  const Word L1 = slice(L, 0, 1), Lr = slice(L, 1, n);
  const Word R1 = slice(R, 0, 1), Rr = slice(R, 1, m);
  if (kind == BracketKind::commutator) {
    if (m % 2 == 0) {
      if (n > 1) {
        // [A1 A2, B] = A1 [A2, B] + [A1, B] A2
        expand(kind, Lr, R, sign, cat(prefix, L1), suffix, out);
        expand(kind, L1, R, sign, prefix, cat(Lr, suffix), out);
      } else {
        // [A, B1 B2] = {A, B1} B2 - B1 {A, B2}
        expand(BracketKind::anticommutator, L, R1, sign, prefix, cat(Rr, suffix), out);
        expand(BracketKind::anticommutator, L, Rr, -sign, cat(prefix, R1), suffix, out);
      }
    } else {
      require(n % 2 == 0, errc::hypothesis, "commutator expansion needs an even side");
      // [A1 A2, B] = A1 {A2, B} - {A1, B} A2
      expand(BracketKind::anticommutator, L1, R, -sign, prefix, cat(Lr, suffix), out);
      expand(BracketKind::anticommutator, Lr, R, sign, cat(prefix, L1), suffix, out);
    }
    return;
  }
  require(n % 2 == 1 && m % 2 == 1, errc::hypothesis, "anticommutator expansion needs odd sides");
  if (n > 1) {
    // {A1 A2, B} = {A1, B} A2 + A1 [A2, B]
    expand(BracketKind::anticommutator, L1, R, sign, prefix, cat(Lr, suffix), out);
    expand(BracketKind::commutator, Lr, R, sign, cat(prefix, L1), suffix, out);
  } else {
    // {A, B1 B2} = {A, B1} B2 - B1 [A, B2]
    expand(BracketKind::anticommutator, L, R1, sign, prefix, cat(Rr, suffix), out);
    expand(BracketKind::commutator, L, Rr, -sign, cat(prefix, R1), suffix, out);
  }
}

}  // namespace detail

/// Expands [a_1..a_N, b_1..b_M] (N or M even) or {a_1..a_N, b_1..b_M} (N, M odd)
/// into exactly N*M terms +-(word){a_i, b_j}(word).
inline OperatorExpression expand_commutator(int N, int M, BracketKind kind) {
  require(N >= 1 && M >= 1, errc::parameter, "both sides need at least one factor");
  if (kind == BracketKind::commutator)
    require(N % 2 == 0 || M % 2 == 0, errc::hypothesis, "commutator expansion needs N or M even");
  else
    require(N % 2 == 1 && M % 2 == 1, errc::hypothesis, "anticommutator expansion needs N and M odd");
  detail::Word L, R;
  for (int i = 0; i < N; ++i) L.push_back({Side::lhs, i});
  for (int j = 0; j < M; ++j) R.push_back({Side::rhs, j});
  OperatorExpression e;
  e.kind = kind;
  e.n_lhs = N;
  e.n_rhs = M;
  detail::expand(kind, L, R, 1, {}, {}, e.terms);
  require(int(e.terms.size()) == N * M, errc::numerical, "expansion produced the wrong number of terms");
  return e;
}

/// a(f) or a*(f) for f with mode coefficients c.
struct Generator {
  Eigen::VectorXcd c;
  bool dagger = false;

  FockOperator op() const { return dagger ? adag_of_coefficients(c) : a_of_coefficients(c); }
};

/// CAR value of {x, y}: <f,g> for {a(f), a*(g)}, <g,f> for {a*(f), a(g)}, else 0.
inline cplx car_anchor(const Generator& x, const Generator& y) {
  if (x.dagger == y.dagger) return 0.0;
  return x.dagger ? y.c.dot(x.c) : x.c.dot(y.c);
}

/// Evaluates the expression on generators, with anchors replaced by their
/// CAR scalars.
inline FockOperator materialize(const OperatorExpression& e, const std::vector<Generator>& lhs,
                                const std::vector<Generator>& rhs) {
  require(int(lhs.size()) == e.n_lhs && int(rhs.size()) == e.n_rhs, errc::shape, "slot count mismatch");
  const int modes = int(lhs[0].c.size());
  std::vector<FockOperator> L, R;
  for (const auto& g : lhs) L.push_back(g.op());
  for (const auto& g : rhs) R.push_back(g.op());
  FockOperator sum = FockOperator::zero(modes);
  for (const auto& t : e.terms) {
    cplx s = double(t.sign);
    for (const auto& a : t.anchors) s *= car_anchor(lhs[size_t(a.i)], rhs[size_t(a.j)]);
    if (s == 0.0) continue;
    FockOperator w = FockOperator::identity(modes);
    for (const auto& f : t.factors) w = w * (f.side == Side::lhs ? L : R)[size_t(f.index)];
    sum = sum + s * w;
  }
  return sum;
}

/// Evaluates the expression on arbitrary operators, with anchors kept as the
/// operator anticommutators {A_i, B_j}.
inline FockOperator materialize_operators(const OperatorExpression& e, const std::vector<FockOperator>& L,
                                          const std::vector<FockOperator>& R) {
  require(int(L.size()) == e.n_lhs && int(R.size()) == e.n_rhs, errc::shape, "slot count mismatch");
  const int modes = L[0].modes();
  FockOperator sum = FockOperator::zero(modes);
  for (const auto& t : e.terms) {
    FockOperator w = FockOperator::identity(modes);
    for (size_t k = 0; k <= t.factors.size(); ++k) {
      if (int(k) == t.anchor_at)
        for (const auto& a : t.anchors) w = w * anticommutator(L[size_t(a.i)], R[size_t(a.j)]);
      if (k < t.factors.size()) w = w * (t.factors[k].side == Side::lhs ? L : R)[size_t(t.factors[k].index)];
    }
    sum = sum + cplx(double(t.sign)) * w;
  }
  return sum;
}

/// Direct [prod A, prod B] or {prod A, prod B}.
inline FockOperator direct_bracket(BracketKind kind, const std::vector<FockOperator>& L,
                                   const std::vector<FockOperator>& R) {
  const int modes = L[0].modes();
  FockOperator A = FockOperator::identity(modes), B = FockOperator::identity(modes);
  for (const auto& x : L) A = A * x;
  for (const auto& y : R) B = B * y;
  return kind == BracketKind::commutator ? commutator(A, B) : anticommutator(A, B);
}

}  // namespace lightcone
