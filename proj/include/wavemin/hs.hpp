// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "wavemin/solver.hpp"

namespace wavemin {

/// Polarization T = (L - L0) F, stored in the field layout of its physics.
/// Trace entries are always zero.
struct Polarization {
  FieldLayout layout;
  Vector values;
};

/// Homogeneous comparison medium L0 = diag(C0, P0) together with the
/// equivalent real parameters
///   C0 = [[D2 + D1 D3^-1 D1^T, -D1 D3^-1], [-D3^-1 D1^T, D3^-1]],
///   P0 = -[[Q2 + Q1 Q3^-1 Q1^T, -Q1 Q3^-1], [-Q3^-1 Q1^T, Q3^-1]].
struct ComparisonMedium {
  OperatorL L0;
  Matrix D1, D2, D3, Q1, Q2, Q3;

  static ComparisonMedium from_blocks(const CGBlock& c0, const CGBlock& p0) {
    const OperatorL L = assemble_L(c0, p0);
    for (const CGBlock* b : {&c0, &p0}) {
      const Matrix m = b->dense();
      if (!detail::is_symmetric(m)) throw ValidationError("comparison medium block is not symmetric");
      if (!(detail::min_eigenvalue(m) > 0.0))
        throw PassivityError("comparison medium", "comparison medium block is not positive definite");
    }
    ComparisonMedium cm;
    cm.L0 = L;
    cm.D3 = detail::symmetrize(detail::inverse(c0.d, "comparison medium"));
    cm.D1 = -c0.b * cm.D3;
    cm.D2 = detail::symmetrize(c0.a - cm.D1 * c0.d * cm.D1.transpose());
    cm.Q3 = -detail::symmetrize(detail::inverse(p0.d, "comparison medium"));
    cm.Q1 = p0.b * cm.Q3;
    cm.Q2 = detail::symmetrize(-p0.a + p0.b * p0.d.inverse() * p0.b.transpose());
    return cm;
  }

  static ComparisonMedium from_moduli(const ComplexModuli& m) {
    const OperatorL L = assemble_L(m);
    return from_blocks(L.first, L.second);
  }

  /// Builds C0, P0 from the real parameters; D2, D3, -Q2, -Q3 must be positive definite.
  static ComparisonMedium from_dq(const Matrix& d1, const Matrix& d2, const Matrix& d3,
                                  const Matrix& q1, const Matrix& q2, const Matrix& q3) {
    auto pd = [](const Matrix& m, const char* name) {
      if (!detail::is_symmetric(m) || !(detail::min_eigenvalue(m) > 0.0))
        throw ValidationError(std::string(name) + " must be symmetric positive definite");
    };
    pd(d2, "D2");
    pd(d3, "D3");
    pd(-q2, "-Q2");
    pd(-q3, "-Q3");
    ComparisonMedium cm;
    cm.D1 = d1;
    cm.D2 = d2;
    cm.D3 = d3;
    cm.Q1 = q1;
    cm.Q2 = q2;
    cm.Q3 = q3;
    cm.L0 = assemble_L(cm.reconstruct_C0(), cm.reconstruct_P0());
    return cm;
  }

  CGBlock reconstruct_C0() const {
    const Matrix d3i = detail::inverse(D3, "D3");
    return {detail::symmetrize(D2 + D1 * d3i * D1.transpose()), -D1 * d3i, detail::symmetrize(d3i)};
  }

  CGBlock reconstruct_P0() const {
    const Matrix q3i = detail::inverse(Q3, "Q3");
    return {detail::symmetrize(-(Q2 + Q1 * q3i * Q1.transpose())), Q1 * q3i, detail::symmetrize(-q3i)};
  }

  /// [[D2, D1], [D1^T, -D3]] and [[Q2, Q1], [Q1^T, -Q3]].
  Matrix D0() const {
    Matrix m(2 * D2.rows(), 2 * D2.rows());
    m << D2, D1, D1.transpose(), -D3;
    return m;
  }
  Matrix Q0() const {
    Matrix m(2 * Q2.rows(), 2 * Q2.rows());
    m << Q2, Q1, Q1.transpose(), -Q3;
    return m;
  }

  /// Same L0 on every entity of a layout; block sizes must match.
  SparseMatrix assemble(const FieldLayout& lay) const {
    if (L0.first.size() != lay.s1 || L0.second.size() != lay.s2)
      throw ValidationError("comparison medium size does not match the field layout");
    std::vector<Triplet> t;
    auto put = [&](const Matrix& m, const std::vector<Eigen::Index>& idx) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j)
          if (m(i, j) != 0.0) t.emplace_back(idx[i], idx[j], m(i, j));
    };
    const Matrix a = L0.first.dense(), b = L0.second.dense();
    for (Eigen::Index e = 0; e < lay.n1 + lay.n2; ++e)
      put(e < lay.n1 ? a : b, entity_indices(lay, e));
    SparseMatrix L(lay.size(), lay.size());
    L.setFromTriplets(t.begin(), t.end());
    return L;
  }
};

namespace detail {

inline std::string entity_name(const FieldLayout& lay, Eigen::Index k) {
  const bool first = k < lay.n1;
  const bool cell = first == lay.block1_on_cells;
  return std::string(cell ? "cell " : "node ") + std::to_string(first ? k : k - lay.n1);
}

/// Per-entity inverse of L - L0 as a sparse matrix over the layout (zero on
/// the trace). Entities whose difference has smallest |eigenvalue| below
/// 1e-8 times the block scale are rejected by name.
inline SparseMatrix difference_inverse(const FieldLayout& lay, const SparseMatrix& L,
                                       const SparseMatrix& L0) {
  const auto bl = entity_blocks(lay, L);
  const auto b0 = entity_blocks(lay, L0);
  std::vector<Triplet> t;
  std::vector<std::string> bad;
  for (std::size_t k = 0; k < bl.size(); ++k) {
    const Matrix d = symmetrize(bl[k] - b0[k]);
    const double scale = std::max({max_abs(bl[k]), max_abs(b0[k]), 1e-300});
    const double margin = sym_eigenvalues(d).cwiseAbs().minCoeff();
    if (margin < 1e-8 * scale) {
      bad.push_back(entity_name(lay, static_cast<Eigen::Index>(k)));
      continue;
    }
    const Matrix inv = symmetrize(inverse(d, "polarization"));
    const auto idx = entity_indices(lay, static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) t.emplace_back(idx[i], idx[j], inv(i, j));
  }
  if (!bad.empty()) {
    std::string msg = "L - L0 is singular at";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += (i ? ", " : " ") + bad[i];
    if (bad.size() > 20) msg += " and " + std::to_string(bad.size() - 20) + " more";
    throw ValidationError(msg);
  }
  SparseMatrix M(lay.size(), lay.size());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

}  // namespace detail

/// Single entity: T = (L - L0) f.
inline Vector exact_polarization(const Vector& f, const OperatorL& L, const ComparisonMedium& L0) {
  if (f.size() != L.size() || L0.L0.size() != L.size())
    throw ValidationError("exact_polarization: dimension mismatch");
  const Matrix d = L.dense() - L0.L0.dense();
  const double scale = std::max({detail::max_abs(L.dense()), detail::max_abs(L0.L0.dense()), 1e-300});
  if (detail::sym_eigenvalues(d).cwiseAbs().minCoeff() < 1e-8 * scale)
    throw ValidationError("L - L0 is singular");
  return d * f;
}

/// Entitywise T = (L - L0) F; rejects entities where L - L0 is near singular.
inline Polarization exact_polarization(const FieldState& F, const SparseMatrix& L,
                                       const SparseMatrix& L0) {
  if (F.values.size() != L.rows() || L0.rows() != L.rows())
    throw ValidationError("exact_polarization: dimension mismatch");
  detail::difference_inverse(F.layout, L, L0);
  Vector t = (L - L0) * F.values;
  t.tail(F.layout.ntrace).setZero();
  return {F.layout, t};
}

/// sum W [ (T - G0) . F + 1/2 F . L0 F - 1/2 T . (L - L0)^-1 T ].
inline double evaluate_hs(const FieldState& F, const Polarization& T, const SparseMatrix& L,
                          const SparseMatrix& L0, const Vector& weights, const Vector& g0) {
  const auto n = F.values.size();
  if (T.values.size() != n || L.rows() != n || L0.rows() != n || weights.size() != n || g0.size() != n)
    throw ValidationError("evaluate_hs: dimension mismatch");
  const SparseMatrix Minv = detail::difference_inverse(F.layout, L, L0);
  const Vector& f = F.values;
  const Vector& t = T.values;
  const Vector integrand = (t - g0).cwiseProduct(f) + 0.5 * f.cwiseProduct(L0 * f) -
                           0.5 * t.cwiseProduct(Minv * t);
  return weights.dot(integrand);
}

inline double evaluate_hs(const FieldState& F, const Polarization& T, const DiscreteProblem& p,
                          const SparseMatrix& L0) {
  return evaluate_hs(F, T, p.L(), L0, p.weights(), p.source().g0);
}

enum class BoundKind { minimum_principle, saddle_principle, indefinite };

inline const char* to_string(BoundKind b) {
  switch (b) {
    case BoundKind::minimum_principle: return "minimum_principle";
    case BoundKind::saddle_principle: return "saddle_principle";
    case BoundKind::indefinite: return "indefinite";
  }
  return "?";
}

/// minimum_principle when L0 - L is positive definite on every entity,
/// saddle_principle when L - L0 is, indefinite otherwise.
inline BoundKind classify_bound(const std::vector<Matrix>& L, const std::vector<Matrix>& L0) {
  if (L.size() != L0.size()) throw ValidationError("classify_bound: entity count mismatch");
  bool above = true, below = true;
  for (std::size_t k = 0; k < L.size(); ++k) {
    const double scale = std::max({detail::max_abs(L[k]), detail::max_abs(L0[k]), 1e-300});
    const Vector ev = detail::sym_eigenvalues(L0[k] - L[k]);
    const double tol = kStrictnessTolerance * scale;
    if (!(ev.minCoeff() > tol)) above = false;
    if (!(ev.maxCoeff() < -tol)) below = false;
  }
  if (above) return BoundKind::minimum_principle;
  if (below) return BoundKind::saddle_principle;
  return BoundKind::indefinite;
}

inline BoundKind classify_bound(const FieldLayout& lay, const SparseMatrix& L, const SparseMatrix& L0) {
  return classify_bound(entity_blocks(lay, L), entity_blocks(lay, L0));
}

inline BoundKind classify_bound(const OperatorL& L, const ComparisonMedium& L0) {
  return classify_bound(std::vector<Matrix>{L.dense()}, std::vector<Matrix>{L0.L0.dense()});
}

struct HSMinimum {
  FieldState F;
  double value = 0.0;
  SolveReport report;
};

/// inf over admissible F of the HS functional at fixed T: the comparison
/// problem with load G0 - T.
inline HSMinimum field_minimized_hs(const DiscreteProblem& p, const SparseMatrix& L0,
                                    const Polarization& T, const SolveOptions& opts = {}) {
  if (T.values.size() != p.layout().size()) throw ValidationError("field_minimized_hs: dimension mismatch");
  const DiscreteProblem q = p.with_operator(L0).with_load(p.source().g0 - T.values);
  auto [F, rep] = minimize_cg(q, opts);
  if (!rep.converged) throw SolverError("field_minimized_hs: conjugate gradients did not converge");
  const double v = evaluate_hs(F, T, p, L0);
  return {F, v, rep};
}

/// H0 T = A (A^T W L0 A)^-1 A^T W T over fields with homogeneous data, so that
/// F' = -H0 T minimizes sum W (T . F' + 1/2 F' . L0 F').
class DiscreteH0 {
 public:
  DiscreteH0(const DiscreteProblem& p, const SparseMatrix& L0)
      : hom_(p.with_operator(L0).homogeneous()), W_(p.weights()) {
    ldlt_.compute(hom_.hessian());
    if (ldlt_.info() != Eigen::Success) throw SolverError("comparison operator is singular");
  }

  Vector apply(const Vector& T) const {
    const Vector rhs = hom_.A().transpose() * W_.cwiseProduct(T);
    return hom_.A() * ldlt_.solve(rhs);
  }

  std::function<Vector(const Vector&)> applier() const {
    return [this](const Vector& t) { return apply(t); };
  }

 private:
  DiscreteProblem hom_;
  Vector W_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

/// Polarization-only problem [(L - L0)^-1 + H0] T = F0 with value
///   comparison_value + sum W [T . F0 - 1/2 T . ((L - L0)^-1 + H0) T].
struct CondensedSystem {
  Vector F0;
  Vector weights;
  SparseMatrix difference_inverse;
  std::function<Vector(const Vector&)> H0;
  double comparison_value = 0.0;

  Vector apply(const Vector& T) const { return difference_inverse * T + H0(T); }
  Vector residual(const Vector& T) const { return mask(apply(T) - F0); }
  double value(const Vector& T) const {
    return comparison_value + weights.dot(T.cwiseProduct(F0) - 0.5 * T.cwiseProduct(apply(T)));
  }
  Vector mask(Vector v) const {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (weights(i) == 0.0) v(i) = 0.0;
    return v;
  }
};

inline CondensedSystem make_condensed_system(const DiscreteProblem& p, const SparseMatrix& L0,
                                             const FieldState& F0, std::function<Vector(const Vector&)> H0) {
  CondensedSystem s;
  s.F0 = F0.values;
  s.weights = p.weights();
  s.difference_inverse = detail::difference_inverse(p.layout(), p.L(), L0);
  s.H0 = std::move(H0);
  s.comparison_value = evaluate_functional(F0, L0, p.weights(), p.source().g0).total;
  return s;
}

struct CondensedResult {
  Vector T;
  double value = 0.0;
  double residual = 0.0;  // |[(L - L0)^-1 + H0] T - F0| / |F0|
  SolveReport report;
};

inline CondensedResult condensed_evaluate(const CondensedSystem& s, const Vector& T) {
  CondensedResult r;
  r.T = T;
  r.value = s.value(T);
  const double f0 = s.mask(s.F0).norm();
  r.residual = s.residual(T).norm() / (f0 > 0.0 ? f0 : 1.0);
  return r;
}

/// Dense solve over the weighted entries (small systems).
inline CondensedResult condense_and_solve_dense(const CondensedSystem& s) {
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < s.weights.size(); ++i)
    if (s.weights(i) != 0.0) live.push_back(i);
  const auto n = static_cast<Eigen::Index>(live.size());
  Matrix M(n, n);
  Vector e = Vector::Zero(s.weights.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    e(live[j]) = 1.0;
    const Vector col = s.apply(e);
    e(live[j]) = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) M(i, j) = col(live[i]);
  }
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = s.F0(live[i]);
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw SolverError("condensed operator is singular");
  const Vector x = lu.solve(b);
  Vector T = Vector::Zero(s.weights.size());
  for (Eigen::Index i = 0; i < n; ++i) T(live[i]) = x(i);
  return condensed_evaluate(s, T);
}

/// Conjugate gradients in the W inner product. The operator is negated for a
/// minimum principle (L0 > L) so that it is positive definite.
inline CondensedResult condense_and_solve_cg(const CondensedSystem& s, BoundKind kind,
                                             const SolveOptions& opts = {}) {
  if (kind == BoundKind::indefinite)
    throw ValidationError("condensed conjugate gradients need a definite comparison medium");
  opts.validate();
  const double sign = kind == BoundKind::minimum_principle ? -1.0 : 1.0;
  const Vector sw = s.weights.cwiseSqrt();
  Vector isw = Vector::Zero(sw.size());
  for (Eigen::Index i = 0; i < sw.size(); ++i)
    if (sw(i) > 0.0) isw(i) = 1.0 / sw(i);
  // Symmetric form in y = W^1/2 T.
  detail::LinearOp apply = [&](const Vector& y) -> Vector {
    return sign * sw.cwiseProduct(s.apply(isw.cwiseProduct(y)));
  };
  detail::LinearOp id = [](const Vector& v) -> Vector { return v; };
  const Vector b = sign * sw.cwiseProduct(s.F0);
  SolveReport rep;
  const Vector y = detail::pcg(apply, id, b, Vector::Zero(b.size()), opts.relative_residual_tolerance,
                               opts.max_iterations, rep);
  CondensedResult r = condensed_evaluate(s, isw.cwiseProduct(y));
  r.report = rep;
  return r;
}

}  // namespace wavemin
