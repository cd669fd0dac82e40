// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wavemin {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kPi = 3.14159265358979323846;

enum class Physics { elastic, acoustic, electromagnetic };

inline std::string_view to_string(Physics p) {
  switch (p) {
    case Physics::elastic: return "elastic";
    case Physics::acoustic: return "acoustic";
    case Physics::electromagnetic: return "electromagnetic";
  }
  return "unknown";
}

inline Physics physics_from_string(std::string_view s) {
  if (s == "elastic" || s == "elastodynamic") return Physics::elastic;
  if (s == "acoustic" || s == "acoustics") return Physics::acoustic;
  if (s == "electromagnetic" || s == "em") return Physics::electromagnetic;
  throw std::invalid_argument("unknown physics '" + std::string(s) + "'");
}

// Errors ---------------------------------------------------------------------

/// Malformed input: shapes, symmetry, schema.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Imaginary part of a modulus has the wrong definiteness.
class PassivityError : public ValidationError {
 public:
  PassivityError(std::string tensor, const std::string& what)
      : ValidationError(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

/// Numerical failure inside a solver (indefinite operator, singular system).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Small dense helpers ----------------------------------------------------------

namespace detail {

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(max_abs(a), 1e-300);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Eigenvalues of a symmetric matrix in ascending order.
inline Vector sym_eigenvalues(const Matrix& a) {
  if (a.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& a) { return sym_eigenvalues(a).minCoeff(); }

/// Solve a x = b for small dense blocks; throws on singular a.
inline Matrix solve_dense(const Matrix& a, const Matrix& b, const char* what) {
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw SolverError(std::string("singular matrix in ") + what);
  return lu.solve(b);
}

inline Matrix inverse(const Matrix& a, const char* what) {
  return solve_dense(a, Matrix::Identity(a.rows(), a.cols()), what);
}

/// Block-diagonal [a 0; 0 b].
inline Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace detail
}  // namespace wavemin
