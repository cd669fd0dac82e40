// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wavemin/hs.hpp"
#include "wavemin/quadrature.hpp"

namespace wavemin {

inline constexpr int kDefaultSphereOrder = 32;
inline constexpr int kRingPoints = 256;

/// Infinite homogeneous comparison medium. The displacement-like field u has
/// nu components and the strain-like field e = B(grad) u has ne components:
/// ne = 6, nu = 3 for elasticity (Mandel strain), ne = 3, nu = 1 for a scalar
/// field whose strain is its gradient.
class GreensMedium {
 public:
  explicit GreensMedium(ComparisonMedium cm) : cm_(std::move(cm)) {
    ne_ = cm_.D2.rows();
    nu_ = cm_.Q2.rows();
    if (!((ne_ == 6 && nu_ == 3) || (ne_ == 3 && nu_ == 1)))
      throw ValidationError("comparison medium must be 3D elastic (6x6 D, 3x3 Q) or scalar (3x3 D, 1x1 Q)");
    D0_ = cm_.D0();
    Q0_ = cm_.Q0();
    Q0inv_ = detail::inverse(Q0_, "Q0");
  }

  const ComparisonMedium& medium() const { return cm_; }
  Eigen::Index nu() const { return nu_; }
  Eigen::Index ne() const { return ne_; }
  /// Polarization / field quadruple size 2 ne + 2 nu.
  Eigen::Index block_size() const { return 2 * ne_ + 2 * nu_; }
  const Matrix& D0() const { return D0_; }
  const Matrix& Q0() const { return Q0_; }
  const Matrix& Q0_inverse() const { return Q0inv_; }

  /// B(xi): e = B(xi) u for u(x) = u exp(xi . x) to first order.
  Matrix strain(const Vector3& xi) const {
    if (nu_ == 1) return xi;
    const double r = 1.0 / std::sqrt(2.0);
    Matrix b = Matrix::Zero(6, 3);
    b(0, 0) = xi(0);
    b(1, 1) = xi(1);
    b(2, 2) = xi(2);
    b(3, 1) = r * xi(2);
    b(3, 2) = r * xi(1);
    b(4, 0) = r * xi(2);
    b(4, 2) = r * xi(0);
    b(5, 0) = r * xi(1);
    b(5, 1) = r * xi(0);
    return b;
  }

  Matrix strain2(const Vector3& xi) const {
    const Matrix b = strain(xi);
    return detail::block_diag(b, b);
  }

  /// L0(xi) = [[xi D2 xi, xi D1 xi], [xi D1^T xi, -xi D3 xi]].
  Matrix acoustic(const Vector3& xi) const {
    const Matrix b = strain2(xi);
    return detail::symmetrize(b.transpose() * D0_ * b);
  }

  Matrix acoustic_cross(const Vector3& a, const Vector3& b) const {
    return strain2(a).transpose() * D0_ * strain2(b);
  }

 private:
  ComparisonMedium cm_;
  Eigen::Index ne_ = 0, nu_ = 0;
  Matrix D0_, Q0_, Q0inv_;
};

struct EigenBranch {
  Vector3 xi = Vector3::Zero();
  int index = 0;  // 1-based, sorted by (Re c^2, Im c^2)
  Complex c;      // Im c > 0
  Complex c2;
  CVector U;      // U^T Q0 U = 1
  Complex norm;
  bool perturbed = false;
};

namespace detail {

/// Q0-orthonormalizes (without conjugation) the eigenvectors of one cluster of
/// equal eigenvalues. Returns false when the cluster looks defective.
inline bool orthonormalize_cluster(std::vector<CVector>& v, const CMatrix& Q) {
  const double qs = std::max(Q.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<CVector> rem = v, out;
  auto qn = [&](const CVector& a, const CVector& b) { return (a.transpose() * Q * b)(0, 0); };
  auto rel = [&](const CVector& a) { return std::abs(qn(a, a)) / (a.squaredNorm() * qs); };
  while (!rem.empty()) {
    for (auto& r : rem)
      for (const auto& u : out) r -= u * qn(u, r);
    std::size_t best = 0;
    for (std::size_t i = 1; i < rem.size(); ++i)
      if (rel(rem[i]) > rel(rem[best])) best = i;
    if (rel(rem[best]) < 1e-6) {
      bool fixed = false;
      for (std::size_t i = 0; i < rem.size() && !fixed; ++i)
        for (std::size_t j = 0; j < rem.size() && !fixed; ++j) {
          if (i == j) continue;
          for (Complex f : {Complex(1.0, 0.0), Complex(0.0, 1.0)}) {
            CVector s = rem[i] + f * rem[j];
            if (rel(s) >= 1e-6) {
              rem[i] = s;
              best = i;
              fixed = true;
              break;
            }
          }
        }
      if (!fixed) return false;
    }
    CVector u = rem[best] / std::sqrt(qn(rem[best], rem[best]));
    out.push_back(u);
    rem.erase(rem.begin() + static_cast<std::ptrdiff_t>(best));
  }
  v = out;
  return true;
}

inline bool compute_branches(const Vector3& xi, const GreensMedium& m, std::vector<EigenBranch>& out) {
  const Matrix L = m.acoustic(xi);
  const Matrix A = m.Q0_inverse() * L;
  Eigen::EigenSolver<Matrix> es(A, true);
  if (es.info() != Eigen::Success) return false;
  const CVector lam = es.eigenvalues();
  const CMatrix V = es.eigenvectors();
  const auto n = lam.size();
  const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> root = [&](int i) { return parent[i] == i ? i : parent[i] = root(parent[i]); };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(lam(i) - lam(j)) <= 1e-9 * scale) parent[root(int(j))] = root(int(i));
  const CMatrix Q = m.Q0().cast<Complex>();
  out.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (root(int(i)) != i) continue;
    std::vector<CVector> vecs;
    Complex mean = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (root(int(j)) == i) {
        vecs.push_back(V.col(j));
        mean += lam(j);
      }
    mean /= double(vecs.size());
    if (!orthonormalize_cluster(vecs, Q)) return false;
    Complex c = std::sqrt(mean);
    if (c.imag() < 0.0) c = -c;
    if (!(c.imag() > 1e-14 * std::abs(c)))
      throw SolverError("branch with real wave speed: comparison medium violates the definiteness assumptions");
    for (auto& u : vecs) {
      EigenBranch b;
      b.xi = xi;
      b.c = c;
      b.c2 = mean;
      b.U = u;
      b.norm = (u.transpose() * Q * u)(0, 0);
      out.push_back(std::move(b));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const EigenBranch& a, const EigenBranch& b) {
    if (a.c2.real() != b.c2.real()) return a.c2.real() < b.c2.real();
    return a.c2.imag() < b.c2.imag();
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].index = static_cast<int>(k) + 1;
  return true;
}

}  // namespace detail

/// Branches of L0(xi) U = c^2 Q0 U. A direction where the eigenproblem looks
/// defective is perturbed by 1e-9 (flagged on the branches); if that fails too
/// the direction is reported in the error.
inline std::vector<EigenBranch> branch_eigen(const Vector3& xi, const GreensMedium& m) {
  if (std::abs(xi.norm() - 1.0) > 1e-12) throw ValidationError("branch_eigen: direction must be a unit vector");
  std::vector<EigenBranch> out;
  if (detail::compute_branches(xi, m, out)) return out;
  const Vector3 alt = (xi + 1e-9 * SphereFrame(xi).e1).normalized();
  if (detail::compute_branches(alt, m, out)) {
    for (auto& b : out) b.perturbed = true;
    return out;
  }
  throw SolverError("defective eigenproblem at direction (" + std::to_string(xi(0)) + ", " +
                    std::to_string(xi(1)) + ", " + std::to_string(xi(2)) + ")");
}

/// max |sum_N U_N U_N^T Q0 - I|.
inline double completeness_residual(const std::vector<EigenBranch>& br, const GreensMedium& m) {
  const auto n = 2 * m.nu();
  CMatrix s = CMatrix::Zero(n, n);
  for (const auto& b : br) s += b.U * b.U.transpose();
  return (s * m.Q0().cast<Complex>() - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
}

/// Decaying solution of c^2 phi'' + omega^2 phi + load delta(s) = 0.
inline Complex plane_wave_profile(const EigenBranch& b, double s, double omega, Complex load) {
  if (!(b.c.imag() > 0.0)) throw ValidationError("plane_wave_profile: Im c must be positive");
  const Complex I(0.0, 1.0);
  return load * std::exp(-I * omega * std::abs(s) / b.c) / (2.0 * I * omega * b.c);
}

/// Shortest decay length |c|^2 / (omega Im c) over the branches on a sample of directions.
inline double decay_length(const GreensMedium& m, double omega, int order = 8) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& node : sphere_rule(SphereFrame(Vector3::UnitZ()), order))
    for (const auto& b : branch_eigen(node.xi, m))
      best = std::min(best, std::norm(b.c) / (omega * b.c.imag()));
  return best;
}

namespace detail {

inline constexpr double kInv8Pi2 = 1.0 / (8.0 * kPi * kPi);

struct PointKernels {
  CMatrix G;
  std::array<CMatrix, 3> dG;
};

/// G0(x) = (1/8 pi^2) sum_N int U U^T / c^2 [delta(xi.x) - (i omega / 2c) exp(-i omega |xi.x| / c)] dS
/// and optionally its gradient.
inline PointKernels point_kernels(const Vector3& x, const GreensMedium& m, double omega, int order,
                                  bool gradient) {
  const double r = x.norm();
  if (r < 1e-8) throw ValidationError("Green's function is singular at the origin (|x| < 1e-8)");
  const auto n = 2 * m.nu();
  const Complex I(0.0, 1.0);
  PointKernels k;
  k.G = CMatrix::Zero(n, n);
  for (auto& d : k.dG) d = CMatrix::Zero(n, n);
  const SphereFrame f(x);
  for (const auto& node : sphere_rule(f, order, {0.0})) {
    const double s = r * node.t;
    for (const auto& b : branch_eigen(node.xi, m)) {
      const Complex beta = 1.0 / (2.0 * I * omega * b.c), gamma = I * omega / b.c;
      const Complex e = std::exp(-gamma * std::abs(s));
      const CMatrix P = b.U * b.U.transpose();
      k.G -= (node.w * kInv8Pi2 * gamma * gamma * beta * e) * P;
      if (gradient) {
        const Complex g = node.w * kInv8Pi2 * gamma * gamma * gamma * beta * e * (s > 0 ? 1.0 : -1.0);
        for (int j = 0; j < 3; ++j) k.dG[j] += (g * node.xi(j)) * P;
      }
    }
  }
  const Vector3 nh = x / r;
  for (const auto& node : ring_rule(f, 0.0, kRingPoints)) {
    CMatrix M = CMatrix::Zero(n, n);
    for (const auto& b : branch_eigen(node.xi, m)) M += b.U * b.U.transpose() / b.c2;
    k.G += (node.w * kInv8Pi2 / r) * M;
    if (gradient) {
      const Matrix dl = m.acoustic_cross(node.xi, nh) + m.acoustic_cross(nh, node.xi);
      const CMatrix Fm = M * dl.cast<Complex>() * M;
      for (int j = 0; j < 3; ++j)
        k.dG[j] += (node.w * kInv8Pi2 / (r * r)) * (-nh(j) * M + node.xi(j) * Fm);
    }
  }
  return k;
}

/// Convolutions of the branch profile derivatives phi^(m), m = 2, 3, 4, with
/// the ball weight w(s) = pi (a^2 - s^2)_+; `ring` multiplies the delta(s -+ a)
/// part of the fourth derivative.
struct BallProfile {
  Complex p2, p3, p4, ring;
};

inline BallProfile ball_profile(Complex c, double omega, double a, double s, const QuadratureRule& gl) {
  const Complex I(0.0, 1.0);
  const Complex beta = 1.0 / (2.0 * I * omega * c), gamma = I * omega / c;
  auto seg = [&](double t0, double t1) {
    Complex acc = 0.0;
    const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
    for (std::size_t q = 0; q < gl.x.size(); ++q) {
      const double t = mid + half * gl.x[q];
      acc += gl.w[q] * half * (a * a - t * t) * std::exp(-gamma * std::abs(s - t));
    }
    return acc;
  };
  const Complex lo = s > -a ? seg(-a, std::min(s, a)) : Complex(0.0);
  const Complex up = s < a ? seg(std::max(s, -a), a) : Complex(0.0);
  const Complex j0 = kPi * (lo + up), j1 = kPi * (lo - up);
  const bool inside = std::abs(s) < a;
  const double w = inside ? kPi * (a * a - s * s) : 0.0;
  const double wp = inside ? -2.0 * kPi * s : 0.0;
  BallProfile p;
  p.p2 = beta * (gamma * gamma * j0 - 2.0 * gamma * w);
  p.p3 = beta * (-gamma * gamma * gamma * j1 - 2.0 * gamma * wp);
  p.p4 = beta * (gamma * gamma * gamma * gamma * j0 - 2.0 * gamma * gamma * gamma * w +
                 (inside ? 4.0 * kPi * gamma : Complex(0.0)));
  p.ring = -4.0 * kPi * a * beta * gamma;
  return p;
}

inline const QuadratureRule& profile_rule() {
  static const QuadratureRule r = gauss_legendre(24);
  return r;
}

/// Breakpoints in t = xi . z / |z| of the ball profiles.
inline std::vector<double> ball_breaks(double r, double a) {
  std::vector<double> b{0.0};
  if (a < r) {
    b.push_back(a / r);
    b.push_back(-a / r);
  }
  return b;
}

/// Integrals over the ball |y| < a of G0(z - y), its gradient and its Hessian.
struct BallKernels {
  CMatrix G;
  std::array<CMatrix, 3> dG;
  std::array<std::array<CMatrix, 3>, 3> ddG;
};

inline BallKernels ball_kernels(const Vector3& z, const GreensMedium& m, double omega, double a, int order) {
  const auto n = 2 * m.nu();
  BallKernels k;
  k.G = CMatrix::Zero(n, n);
  for (int i = 0; i < 3; ++i) {
    k.dG[i] = CMatrix::Zero(n, n);
    for (int j = 0; j < 3; ++j) k.ddG[i][j] = CMatrix::Zero(n, n);
  }
  const double r = z.norm();
  const bool self = r < 1e-12 * a;
  const SphereFrame f(self ? Vector3(Vector3::UnitZ()) : Vector3(z));
  const auto& gl = profile_rule();
  for (const auto& node : sphere_rule(f, order, self ? std::vector<double>{0.0} : ball_breaks(r, a))) {
    const double s = self ? 0.0 : r * node.t;
    for (const auto& b : branch_eigen(node.xi, m)) {
      const BallProfile p = ball_profile(b.c, omega, a, s, gl);
      const CMatrix P = (-kInv8Pi2 * node.w) * (b.U * b.U.transpose());
      k.G += p.p2 * P;
      for (int i = 0; i < 3; ++i) {
        k.dG[i] += (p.p3 * node.xi(i)) * P;
        for (int j = 0; j < 3; ++j) k.ddG[i][j] += (p.p4 * node.xi(i) * node.xi(j)) * P;
      }
    }
  }
  if (!self && a < r) {
    for (double t : {a / r, -a / r})
      for (const auto& node : ring_rule(f, t, kRingPoints))
        for (const auto& b : branch_eigen(node.xi, m)) {
          const BallProfile p = ball_profile(b.c, omega, a, r * t, gl);
          const CMatrix P = (-kInv8Pi2 * node.w / r * p.ring) * (b.U * b.U.transpose());
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) k.ddG[i][j] += (node.xi(i) * node.xi(j)) * P;
        }
  }
  return k;
}

inline double imag_ratio(const CMatrix& m) {
  const double re = m.real().cwiseAbs().maxCoeff();
  return re > 0.0 ? m.imag().cwiseAbs().maxCoeff() / re : m.imag().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// G0(x) = [[G2, G1], [G1^T, -G3]] with optional first derivatives.
struct GreensEvaluation {
  Vector3 x = Vector3::Zero();
  Matrix G;
  Matrix G1, G2, G3;
  std::array<Matrix, 3> gradient;
  bool has_gradient = false;
  int order = kDefaultSphereOrder;
  double imag_residue = 0.0;  // max |Im| / max |Re|
};

inline GreensEvaluation greens_evaluate(const Vector3& x, double omega, const GreensMedium& m,
                                        int order = kDefaultSphereOrder, bool gradient = false) {
  if (!(omega > 0.0)) throw ValidationError("frequency omega must be positive");
  const auto k = detail::point_kernels(x, m, omega, order, gradient);
  GreensEvaluation g;
  g.x = x;
  g.order = order;
  g.G = k.G.real();
  g.imag_residue = detail::imag_ratio(k.G);
  const auto nu = m.nu();
  g.G2 = g.G.topLeftCorner(nu, nu);
  g.G1 = g.G.topRightCorner(nu, nu);
  g.G3 = -g.G.bottomRightCorner(nu, nu);
  g.has_gradient = gradient;
  if (gradient)
    for (int j = 0; j < 3; ++j) g.gradient[j] = k.dG[j].real();
  return g;
}

/// Residual of div(D0 grad G0) + omega^2 Q0 G0 at x by central differences
/// of step h, relative to |omega^2 Q0 G0|.
inline double greens_fd_residual(const Vector3& x, double omega, const GreensMedium& m, double h,
                                 int order = kDefaultSphereOrder) {
  auto G = [&](const Vector3& y) { return greens_evaluate(y, omega, m, order).G; };
  const Matrix g0 = G(x);
  Matrix acc = omega * omega * m.Q0() * g0;
  const Matrix ref = acc;
  for (int j = 0; j < 3; ++j)
    for (int l = 0; l < 3; ++l) {
      const Matrix Djl = m.strain2(Vector3::Unit(j)).transpose() * m.D0() * m.strain2(Vector3::Unit(l));
      Matrix d2;
      if (j == l) {
        d2 = (G(x + h * Vector3::Unit(j)) - 2.0 * g0 + G(x - h * Vector3::Unit(j))) / (h * h);
      } else {
        const Vector3 ej = h * Vector3::Unit(j), el = h * Vector3::Unit(l);
        d2 = (G(x + ej + el) - G(x + ej - el) - G(x - ej + el) + G(x - ej - el)) / (4.0 * h * h);
      }
      acc += Djl * d2;
    }
  return acc.cwiseAbs().maxCoeff() / std::max(ref.cwiseAbs().maxCoeff(), 1e-300);
}

// Voxel clouds ---------------------------------------------------------------------

/// Cubic voxels of side h. Polarizations are uniform per voxel and act as
/// equal-volume balls; fields are evaluated at voxel centres.
struct VoxelGrid {
  double h = 1.0;
  std::vector<Vector3> centers;

  double volume() const { return h * h * h; }
  double ball_radius() const { return h * std::cbrt(3.0 / (4.0 * kPi)); }
  std::size_t size() const { return centers.size(); }

  static VoxelGrid box(int nx, int ny, int nz, double h, const Vector3& origin = Vector3::Zero()) {
    if (nx < 1 || ny < 1 || nz < 1 || !(h > 0.0)) throw ValidationError("voxel grid needs positive counts and spacing");
    VoxelGrid g;
    g.h = h;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) g.centers.push_back(origin + h * Vector3(i + 0.5, j + 0.5, k + 0.5));
    return g;
  }

  void validate() const {
    if (!(h > 0.0)) throw ValidationError("voxel spacing must be positive");
    for (std::size_t i = 0; i < centers.size(); ++i)
      for (std::size_t j = i + 1; j < centers.size(); ++j)
        if ((centers[i] - centers[j]).norm() < 0.999 * h)
          throw ValidationError("voxels " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
  }
};

/// Warnings about a voxel grid that under-resolves the decay length.
inline std::vector<std::string> grid_warnings(const VoxelGrid& g, const GreensMedium& m, double omega) {
  std::vector<std::string> w;
  const double ell = decay_length(m, omega);
  if (g.h > ell / 4.0)
    w.push_back("voxel spacing " + std::to_string(g.h) + " gives fewer than 4 voxels per decay length " +
                std::to_string(ell));
  return w;
}

struct H0Matrix {
  Matrix H;                 // (V * block) squared, F' = -H T
  double imag_residue = 0.0;
  double asymmetry = 0.0;   // max |H - H^T| / max |H|
  std::vector<std::string> warnings;
};

/// Block (alpha, beta) of H0 for z = x_alpha - x_beta, per direction and branch
///   l1 = (B u', D1^T B u' - D3 B u'', 0, 0), l0 = (0, 0, omega u', omega (Q1^T u' - Q3 u'')),
///   K = -(1/8 pi^2) int sum_N [l1 l1^T p4 + (l0 l1^T - l1 l0^T) p3 - l0 l0^T p2] dS,
/// plus the local terms diag(0, D3, 0, -Q3) on the diagonal; H0 = -(K + local).
inline CMatrix h0_block(const Vector3& z, const GreensMedium& m, double omega, double a, int order) {
  const auto ne = m.ne(), nu = m.nu(), nb = m.block_size();
  const ComparisonMedium& cm = m.medium();
  CMatrix K = CMatrix::Zero(nb, nb);
  const double r = z.norm();
  const bool self = r < 1e-12 * a;
  const SphereFrame f(self ? Vector3(Vector3::UnitZ()) : Vector3(z));
  const auto& gl = detail::profile_rule();
  const CMatrix D1 = cm.D1.cast<Complex>(), D3 = cm.D3.cast<Complex>();
  const CMatrix Q1 = cm.Q1.cast<Complex>(), Q3 = cm.Q3.cast<Complex>();
  auto vectors = [&](const EigenBranch& b, const Vector3& xi, CVector& l1, CVector& l0) {
    const CMatrix B = m.strain(xi).cast<Complex>();
    const CVector u1 = b.U.head(nu), u2 = b.U.tail(nu);
    l1 = CVector::Zero(nb);
    l0 = CVector::Zero(nb);
    const CVector e1 = B * u1, e2 = B * u2;
    l1.head(ne) = e1;
    l1.segment(ne, ne) = D1.transpose() * e1 - D3 * e2;
    l0.segment(2 * ne, nu) = omega * u1;
    l0.segment(2 * ne + nu, nu) = omega * (Q1.transpose() * u1 - Q3 * u2);
  };
  CVector l1, l0;
  for (const auto& node : sphere_rule(f, order, self ? std::vector<double>{0.0} : detail::ball_breaks(r, a))) {
    const double s = self ? 0.0 : r * node.t;
    for (const auto& b : branch_eigen(node.xi, m)) {
      const detail::BallProfile p = detail::ball_profile(b.c, omega, a, s, gl);
      vectors(b, node.xi, l1, l0);
      const Complex w = -detail::kInv8Pi2 * node.w;
      K += (w * p.p4) * (l1 * l1.transpose());
      K += (w * p.p3) * (l0 * l1.transpose() - l1 * l0.transpose());
      K -= (w * p.p2) * (l0 * l0.transpose());
    }
  }
  if (!self && a < r) {
    for (double t : {a / r, -a / r})
      for (const auto& node : ring_rule(f, t, kRingPoints))
        for (const auto& b : branch_eigen(node.xi, m)) {
          const detail::BallProfile p = detail::ball_profile(b.c, omega, a, r * t, gl);
          vectors(b, node.xi, l1, l0);
          K += (-detail::kInv8Pi2 * node.w / r * p.ring) * (l1 * l1.transpose());
        }
  }
  CMatrix H = -K;
  if (self) {
    H.block(ne, ne, ne, ne) += D3;
    H.block(2 * ne + nu, 2 * ne + nu, nu, nu) -= Q3;
  }
  return H;
}

inline H0Matrix assemble_H0(const VoxelGrid& g, const GreensMedium& m, double omega,
                            int order = kDefaultSphereOrder) {
  g.validate();
  if (!(omega > 0.0)) throw ValidationError("frequency omega must be positive");
  const auto nb = m.block_size();
  const auto V = static_cast<Eigen::Index>(g.size());
  H0Matrix out;
  out.H = Matrix::Zero(V * nb, V * nb);
  const double a = g.ball_radius();
  for (Eigen::Index i = 0; i < V; ++i)
    for (Eigen::Index j = 0; j < V; ++j) {
      const CMatrix blk = h0_block(g.centers[i] - g.centers[j], m, omega, a, order);
      out.imag_residue = std::max(out.imag_residue, detail::imag_ratio(blk));
      out.H.block(i * nb, j * nb, nb, nb) = blk.real();
    }
  const double scale = std::max(out.H.cwiseAbs().maxCoeff(), 1e-300);
  out.asymmetry = (out.H - out.H.transpose()).cwiseAbs().maxCoeff() / scale;
  out.warnings = grid_warnings(g, m, omega);
  return out;
}

/// F' = -H0 T for voxel polarizations T (V blocks of (tau'', -eta'', pi', -nu')).
inline Vector apply_H0(const Vector& T, const VoxelGrid& g, const GreensMedium& m, double omega,
                       int order = kDefaultSphereOrder) {
  if (T.size() != static_cast<Eigen::Index>(g.size()) * m.block_size())
    throw ValidationError("apply_H0: polarization size does not match the grid");
  if (T.cwiseAbs().maxCoeff() == 0.0) return Vector::Zero(T.size());
  return -(assemble_H0(g, m, omega, order).H * T);
}

struct PointForce {
  Vector3 x = Vector3::Zero();
  CVector f;  // complex body force f' + i f''
};

/// Fields of the infinite comparison medium at the voxel centres.
struct InfiniteMediumField {
  Vector U;       // (u', u'') per voxel
  Vector strain;  // (e', e'') per voxel
  Vector F;       // (e', sigma', omega u', p'') per voxel
  double imag_residue = 0.0;
  std::vector<std::string> warnings;
};

/// U = int G0 f~ with f~ = (f'' + div(tau'' - D1 eta'') + omega (Q1 nu' - pi'),
/// f' + div(D3 eta'') - omega Q3 nu'); then e = B(grad) u,
/// sigma' = D1^T e' + D3 (eta'' - e''), p'' = Q1^T omega u' - Q3 (omega u'' + nu').
inline InfiniteMediumField solve_infinite_medium(const Vector& T, const std::vector<PointForce>& forces,
                                                 const VoxelGrid& g, const GreensMedium& m, double omega,
                                                 int order = kDefaultSphereOrder) {
  g.validate();
  const auto ne = m.ne(), nu = m.nu(), nb = m.block_size();
  const auto V = static_cast<Eigen::Index>(g.size());
  const Vector Tv = T.size() ? T : Vector::Zero(V * nb);
  if (Tv.size() != V * nb) throw ValidationError("solve_infinite_medium: polarization size does not match the grid");
  for (const auto& pf : forces)
    if (pf.f.size() != nu) throw ValidationError("solve_infinite_medium: force has the wrong size");
  const ComparisonMedium& cm = m.medium();
  InfiniteMediumField out;
  out.U = Vector::Zero(V * 2 * nu);
  out.strain = Vector::Zero(V * 2 * ne);
  out.F = Vector::Zero(V * nb);
  out.warnings = grid_warnings(g, m, omega);
  const double a = g.ball_radius();
  std::array<Matrix, 3> Bj;
  for (int j = 0; j < 3; ++j) Bj[j] = m.strain2(Vector3::Unit(j));

  // Ball sources per voxel: stress-like S (2 ne) and body-force-like q (2 nu).
  std::vector<Vector> S(V), q(V);
  bool any_t = Tv.cwiseAbs().maxCoeff() > 0.0;
  for (Eigen::Index b = 0; b < V; ++b) {
    const Vector t = Tv.segment(b * nb, nb);
    const Vector t1 = t.head(ne), t2 = t.segment(ne, ne), t3 = t.segment(2 * ne, nu), t4 = t.tail(nu);
    S[b] = Vector(2 * ne);
    S[b] << t1 + cm.D1 * t2, -cm.D3 * t2;
    q[b] = Vector(2 * nu);
    q[b] << -omega * (cm.Q1 * t4 + t3), omega * cm.Q3 * t4;
  }
  for (Eigen::Index i = 0; i < V; ++i) {
    CVector u = CVector::Zero(2 * nu);
    std::array<CVector, 3> du;
    for (auto& d : du) d = CVector::Zero(2 * nu);
    if (any_t) {
      for (Eigen::Index b = 0; b < V; ++b) {
        if (Tv.segment(b * nb, nb).cwiseAbs().maxCoeff() == 0.0) continue;
        const auto k = detail::ball_kernels(g.centers[i] - g.centers[b], m, omega, a, order);
        const CVector qb = q[b].cast<Complex>();
        u += k.G * qb;
        for (int j = 0; j < 3; ++j) {
          const CVector sj = (Bj[j].transpose() * S[b]).cast<Complex>();
          u += k.dG[j] * sj;
          for (int l = 0; l < 3; ++l) du[l] += k.ddG[l][j] * sj;
        }
        for (int l = 0; l < 3; ++l) du[l] += k.dG[l] * qb;
      }
    }
    for (const auto& pf : forces) {
      const auto k = detail::point_kernels(g.centers[i] - pf.x, m, omega, order, true);
      CVector f0(2 * nu);
      f0 << pf.f.imag().cast<Complex>(), pf.f.real().cast<Complex>();
      u += k.G * f0;
      for (int l = 0; l < 3; ++l) du[l] += k.dG[l] * f0;
    }
    CVector e = CVector::Zero(2 * ne);
    for (int l = 0; l < 3; ++l) e += Bj[l].cast<Complex>() * du[l];
    out.imag_residue = std::max(out.imag_residue, detail::imag_ratio(CMatrix(u)));
    const Vector ur = u.real(), er = e.real();
    out.U.segment(i * 2 * nu, 2 * nu) = ur;
    out.strain.segment(i * 2 * ne, 2 * ne) = er;
    const Vector t = Tv.segment(i * nb, nb);
    const Vector eta = -t.segment(ne, ne), nuv = -t.tail(nu);
    const Vector e1 = er.head(ne), e2 = er.tail(ne), u1 = ur.head(nu), u2 = ur.tail(nu);
    Vector Fi(nb);
    Fi << e1, cm.D1.transpose() * e1 + cm.D3 * (eta - e2), omega * u1,
        cm.Q1.transpose() * (omega * u1) - cm.Q3 * (omega * u2 + nuv);
    out.F.segment(i * nb, nb) = Fi;
  }
  return out;
}

/// Condensed polarization problem on a voxel cloud: per-voxel true operators
/// L_v against the comparison medium, F0 the comparison field at the centres.
inline CondensedSystem make_voxel_condensed_system(const VoxelGrid& g, const std::vector<OperatorL>& L,
                                                   const GreensMedium& m, double omega, const Vector& F0,
                                                   int order = kDefaultSphereOrder,
                                                   double comparison_value = 0.0) {
  const auto nb = m.block_size();
  const auto V = static_cast<Eigen::Index>(g.size());
  if (static_cast<Eigen::Index>(L.size()) != V || F0.size() != V * nb)
    throw ValidationError("voxel condensed system: sizes do not match the grid");
  const Matrix L0 = m.medium().L0.dense();
  std::vector<Triplet> t;
  std::vector<std::string> bad;
  for (Eigen::Index v = 0; v < V; ++v) {
    const Matrix lv = L[v].dense();
    if (lv.rows() != nb) throw ValidationError("voxel " + std::to_string(v) + ": operator size mismatch");
    const Matrix d = detail::symmetrize(lv - L0);
    const double scale = std::max({detail::max_abs(lv), detail::max_abs(L0), 1e-300});
    if (detail::sym_eigenvalues(d).cwiseAbs().minCoeff() < 1e-8 * scale) {
      bad.push_back(std::to_string(v));
      continue;
    }
    const Matrix inv = detail::symmetrize(detail::inverse(d, "polarization"));
    for (Eigen::Index i = 0; i < nb; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) t.emplace_back(v * nb + i, v * nb + j, inv(i, j));
  }
  if (!bad.empty()) {
    std::string msg = "L - L0 is singular at voxel";
    for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? ", " : " ") + bad[i];
    throw ValidationError(msg);
  }
  CondensedSystem s;
  s.F0 = F0;
  s.weights = Vector::Constant(V * nb, g.volume());
  s.difference_inverse = SparseMatrix(V * nb, V * nb);
  s.difference_inverse.setFromTriplets(t.begin(), t.end());
  auto H = std::make_shared<Matrix>(assemble_H0(g, m, omega, order).H);
  s.H0 = [H](const Vector& x) -> Vector { return *H * x; };
  s.comparison_value = comparison_value;
  return s;
}

struct GreensTableRow {
  Vector3 x = Vector3::Zero();
  int row = 0, col = 0;
  double value = 0.0;
};

inline std::vector<GreensTableRow> greens_table(const std::vector<Vector3>& points, double omega,
                                                const GreensMedium& m, int order = kDefaultSphereOrder) {
  std::vector<GreensTableRow> rows;
  for (const auto& x : points) {
    const auto g = greens_evaluate(x, omega, m, order);
    for (Eigen::Index i = 0; i < g.G.rows(); ++i)
      for (Eigen::Index j = 0; j < g.G.cols(); ++j)
        rows.push_back({x, static_cast<int>(i), static_cast<int>(j), g.G(i, j)});
  }
  return rows;
}

}  // namespace wavemin
