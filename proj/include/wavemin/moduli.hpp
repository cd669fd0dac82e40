// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "wavemin/core.hpp"

namespace wavemin {

/// Complex material moduli of one region.
///
/// `primal` is the stiffness C (Mandel layout), the compressibility k = 1/kappa
/// or the permittivity eps. `dual` is the density rho, the inverse density
/// r = 1/rho or the inverse permeability m = 1/mu. Elastic and acoustic data use
/// the exp(+i w t) convention, electromagnetic data exp(-i w t).
struct ComplexModuli {
  Physics physics = Physics::elastic;
  CMatrix primal;
  CMatrix dual;
  double omega = 1.0;

  static ComplexModuli elastic(CMatrix stiffness, CMatrix density, double omega) {
    return {Physics::elastic, std::move(stiffness), std::move(density), omega};
  }
  static ComplexModuli elastic(Complex stiffness, Complex density, double omega) {
    return elastic(CMatrix::Constant(1, 1, stiffness), CMatrix::Constant(1, 1, density), omega);
  }
  static ComplexModuli acoustic(CMatrix compressibility, CMatrix inverse_density, double omega) {
    return {Physics::acoustic, std::move(compressibility), std::move(inverse_density), omega};
  }
  static ComplexModuli acoustic(Complex compressibility, Complex inverse_density, double omega) {
    return acoustic(CMatrix::Constant(1, 1, compressibility),
                    CMatrix::Constant(1, 1, inverse_density), omega);
  }
  /// Takes eps and mu (positive imaginary parts) and stores m = mu^-1.
  static ComplexModuli electromagnetic(CMatrix permittivity, const CMatrix& permeability,
                                       double omega) {
    return {Physics::electromagnetic, std::move(permittivity), permeability.inverse(), omega};
  }
  static ComplexModuli electromagnetic(Complex permittivity, Complex permeability, double omega) {
    return electromagnetic(CMatrix::Constant(1, 1, permittivity),
                           CMatrix::Constant(1, 1, permeability), omega);
  }
};

inline const char* primal_name(Physics p) {
  switch (p) {
    case Physics::elastic: return "stiffness";
    case Physics::acoustic: return "compressibility";
    case Physics::electromagnetic: return "permittivity";
  }
  return "primal";
}

inline const char* dual_name(Physics p) {
  switch (p) {
    case Physics::elastic: return "density";
    case Physics::acoustic: return "inverse density";
    case Physics::electromagnetic: return "inverse permeability";
  }
  return "dual";
}

/// Sign s such that s * Im(X) must be positive (semi)definite.
inline double primal_sign(Physics p) { return p == Physics::acoustic ? -1.0 : 1.0; }
inline double dual_sign(Physics p) { return p == Physics::acoustic ? 1.0 : -1.0; }

/// Real symmetric matrix with block layout [[a, b], [b^T, d]].
struct CGBlock {
  Matrix a;
  Matrix b;
  Matrix d;

  Eigen::Index size() const { return a.rows(); }

  Matrix dense() const {
    const auto n = size();
    Matrix out(2 * n, 2 * n);
    out << a, b, b.transpose(), d;
    return out;
  }

  static CGBlock from_dense(const Matrix& m) {
    const auto n = m.rows() / 2;
    return {m.topLeftCorner(n, n), m.topRightCorner(n, n), m.bottomRightCorner(n, n)};
  }

  static CGBlock identity(Eigen::Index n) {
    return {Matrix::Identity(n, n), Matrix::Zero(n, n), Matrix::Identity(n, n)};
  }
};

/// Block-diagonal composite L = diag(first, second).
struct OperatorL {
  CGBlock first;
  CGBlock second;

  Matrix dense() const { return detail::block_diag(first.dense(), second.dense()); }
  Eigen::Index size() const { return 2 * (first.size() + second.size()); }
  Vector apply(const Vector& f) const { return dense() * f; }
};

// Passivity -------------------------------------------------------------------

enum class Definiteness { strict, semidefinite, violated };

inline const char* to_string(Definiteness d) {
  switch (d) {
    case Definiteness::strict: return "strict";
    case Definiteness::semidefinite: return "semidefinite";
    case Definiteness::violated: return "violated";
  }
  return "?";
}

inline constexpr double kStrictnessTolerance = 1e-10;

struct TensorPassivity {
  std::string tensor;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  Definiteness classification = Definiteness::violated;
};

struct PassivityReport {
  TensorPassivity primal;
  TensorPassivity dual;

  bool strictly_passive() const {
    return primal.classification == Definiteness::strict &&
           dual.classification == Definiteness::strict;
  }
  bool violated() const {
    return primal.classification == Definiteness::violated ||
           dual.classification == Definiteness::violated;
  }
  /// First tensor that is not strictly definite, or nullptr.
  const TensorPassivity* first_failure() const {
    if (primal.classification != Definiteness::strict) return &primal;
    if (dual.classification != Definiteness::strict) return &dual;
    return nullptr;
  }
};

inline TensorPassivity classify_definiteness(const Matrix& a, std::string tensor) {
  TensorPassivity out;
  out.tensor = std::move(tensor);
  const Vector ev = detail::sym_eigenvalues(a);
  out.min_eigenvalue = ev.minCoeff();
  out.max_eigenvalue = ev.maxCoeff();
  const double scale = ev.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    out.classification = Definiteness::semidefinite;
  } else if (out.min_eigenvalue > kStrictnessTolerance * scale) {
    out.classification = Definiteness::strict;
  } else if (out.min_eigenvalue >= -kStrictnessTolerance * scale) {
    out.classification = Definiteness::semidefinite;
  } else {
    out.classification = Definiteness::violated;
  }
  return out;
}

/// Reports min eigenvalues of the imaginary parts, sign-adjusted so that a
/// passive medium has nonnegative values (C'', -rho''; -k'', r''; eps'', -m'').
inline PassivityReport check_passivity(const ComplexModuli& m) {
  PassivityReport r;
  r.primal = classify_definiteness(primal_sign(m.physics) * m.primal.imag(), primal_name(m.physics));
  r.dual = classify_definiteness(dual_sign(m.physics) * m.dual.imag(), dual_name(m.physics));
  return r;
}

inline Eigen::Index mandel_size(Eigen::Index dim) { return dim * (dim + 1) / 2; }

/// Shape and symmetry checks; throws ValidationError.
inline void validate_moduli(const ComplexModuli& m) {
  if (!(m.omega > 0.0)) throw ValidationError("frequency omega must be positive");
  auto check = [&](const CMatrix& x, const char* name) {
    if (x.rows() == 0 || x.rows() != x.cols())
      throw ValidationError(std::string(name) + " must be a nonempty square matrix");
    if (!x.allFinite()) throw ValidationError(std::string(name) + " has non-finite entries");
    if (!detail::is_symmetric(x.real()) || !detail::is_symmetric(x.imag()))
      throw ValidationError(std::string(name) + " must have symmetric real and imaginary parts");
  };
  check(m.primal, primal_name(m.physics));
  check(m.dual, dual_name(m.physics));
  if (m.physics == Physics::elastic) {
    const auto d = m.dual.rows();
    if (m.primal.rows() != mandel_size(d))
      throw ValidationError("stiffness size does not match the Mandel size of the density");
  } else if (m.physics == Physics::acoustic) {
    if (m.primal.rows() != 1) throw ValidationError("compressibility must be scalar");
  } else {
    if (m.primal.rows() != m.dual.rows())
      throw ValidationError("permittivity and inverse permeability sizes differ");
  }
}

/// [[X'' + X' X''^-1 X', -X' X''^-1], [-X''^-1 X', X''^-1]] for Im X positive definite.
inline CGBlock legendre_block(const CMatrix& x) {
  const Matrix re = x.real();
  const Matrix im = x.imag();
  const Matrix im_inv = detail::symmetrize(detail::inverse(im, "legendre_block"));
  CGBlock blk;
  blk.a = detail::symmetrize(im + re * im_inv * re);
  blk.b = -re * im_inv;
  blk.d = im_inv;
  return blk;
}

/// Block of one tensor X whose sign-adjusted imaginary part s*Im(X) must be
/// strictly positive definite.
inline CGBlock tensor_block(const CMatrix& x, double sign, const std::string& name) {
  const TensorPassivity t = classify_definiteness(sign * x.imag(), name);
  if (t.classification != Definiteness::strict)
    throw PassivityError(name, "passivity error: imaginary part of " + name + " is " +
                                   to_string(t.classification) + " (min eigenvalue " +
                                   std::to_string(t.min_eigenvalue) +
                                   "); strictly definite required");
  return legendre_block(sign > 0 ? x : CMatrix(x.conjugate()));
}

/// Positive definite real blocks of the reformulated constitutive law:
/// (C, P) elastic, (K, R) acoustic, (E, M) electromagnetic.
inline std::pair<CGBlock, CGBlock> build_blocks(const ComplexModuli& m) {
  validate_moduli(m);
  return {tensor_block(m.primal, primal_sign(m.physics), primal_name(m.physics)),
          tensor_block(m.dual, dual_sign(m.physics), dual_name(m.physics))};
}

inline OperatorL assemble_L(const CGBlock& first, const CGBlock& second) {
  auto check = [](const CGBlock& blk, const char* which) {
    const auto n = blk.a.rows();
    if (blk.a.cols() != n || blk.b.rows() != n || blk.b.cols() != n || blk.d.rows() != n ||
        blk.d.cols() != n)
      throw ValidationError(std::string("dimension mismatch in ") + which + " block");
  };
  check(first, "first");
  check(second, "second");
  return {first, second};
}

inline OperatorL assemble_L(const ComplexModuli& m) {
  auto [a, b] = build_blocks(m);
  return assemble_L(a, b);
}

// Rotation ----------------------------------------------------------------------

struct RotatedModuli {
  ComplexModuli moduli;
  bool strictly_passive = false;
  PassivityReport report;
};

/// Multiplies both moduli by exp(i theta). The flag reports strict passivity of
/// the rotated pair.
inline RotatedModuli rotate_moduli(const ComplexModuli& m, double theta) {
  RotatedModuli out{m, false, {}};
  const Complex phase = std::polar(1.0, theta);
  out.moduli.primal = m.primal * phase;
  out.moduli.dual = m.dual * phase;
  out.report = check_passivity(out.moduli);
  out.strictly_passive = out.report.strictly_passive();
  return out;
}

/// Admissible search interval for theta: the sign pattern of the lossless case
/// (real dual modulus) decides which half of (-pi/2, pi/2) can work.
inline std::pair<double, double> rotation_interval(Physics p) {
  if (p == Physics::acoustic) return {0.0, kPi / 2};
  return {-kPi / 2, 0.0};
}

/// Smaller of the two normalized passivity margins after rotation.
inline double rotation_margin(const ComplexModuli& m, double theta) {
  const RotatedModuli r = rotate_moduli(m, theta);
  auto norm = [](const CMatrix& x) {
    return std::max(Eigen::JacobiSVD<CMatrix>(x).singularValues()(0), 1e-300);
  };
  return std::min(r.report.primal.min_eigenvalue / norm(m.primal),
                  r.report.dual.min_eigenvalue / norm(m.dual));
}

struct RotationChoice {
  double theta = 0.0;
  double margin = 0.0;
  bool passive = false;
  std::vector<std::size_t> failing_regions;
};

inline constexpr int kRotationGridPoints = 180;

/// One global theta for all regions: scans a uniform grid in the open
/// admissible interval and keeps the theta with the largest worst-case margin.
inline RotationChoice choose_rotation(std::span<const ComplexModuli> regions) {
  if (regions.empty()) throw ValidationError("choose_rotation: no regions");
  const auto [lo, hi] = rotation_interval(regions.front().physics);
  RotationChoice best;
  best.margin = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < kRotationGridPoints; ++j) {
    const double theta = lo + (j + 1) * (hi - lo) / (kRotationGridPoints + 1);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& m : regions) worst = std::min(worst, rotation_margin(m, theta));
    if (worst > best.margin) {
      best.margin = worst;
      best.theta = theta;
    }
  }
  best.passive = true;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (!rotate_moduli(regions[i], best.theta).strictly_passive) {
      best.passive = false;
      best.failing_regions.push_back(i);
    }
  }
  return best;
}

inline RotationChoice choose_rotation(const ComplexModuli& m) {
  return choose_rotation(std::span<const ComplexModuli>(&m, 1));
}

// Lossless dual limit --------------------------------------------------------------

/// Pointwise elimination used when the dual modulus is real:
/// u' = rho'^-1 p'' / w (elastic), v'' = r' p'' (acoustic), H'' = m' B'' (EM).
struct ReducedFormSpec {
  Physics physics = Physics::elastic;
  Matrix dual_real;
  double omega = 1.0;

  /// Dependent unknown from its driver (p'' for elastic/acoustic, B'' for EM).
  Vector dependent(const Vector& driver) const {
    if (physics == Physics::elastic)
      return detail::solve_dense(dual_real, driver, "lossless_limit") / omega;
    return dual_real * driver;
  }

  /// Relation b = X' a on the dual-block pair (a, b) of F.
  const Matrix& pair_relation() const { return dual_real; }
};

inline ReducedFormSpec lossless_limit(const ComplexModuli& m) {
  validate_moduli(m);
  const Matrix im = m.dual.imag();
  const Matrix re = m.dual.real();
  if (detail::max_abs(im) > 1e-15 * std::max(detail::max_abs(re), 1e-300))
    throw ValidationError(std::string("lossless_limit: imaginary part of ") + dual_name(m.physics) +
                          " is nonzero; use the full formulation");
  Eigen::FullPivLU<Matrix> lu(re);
  if (!lu.isInvertible())
    throw ValidationError(std::string("lossless_limit: real part of ") + dual_name(m.physics) +
                          " is singular");
  return {m.physics, re, m.omega};
}

}  // namespace wavemin
