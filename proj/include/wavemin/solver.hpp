// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/SparseLU>

#include <chrono>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "wavemin/functional.hpp"

namespace wavemin {

enum class Preconditioner { none, block_jacobi };

struct SolveOptions {
  int max_iterations = 20000;
  double relative_residual_tolerance = 1e-12;
  Preconditioner preconditioner = Preconditioner::block_jacobi;
  std::uint64_t seed = 0;
  bool random_start = false;

  void validate() const {
    if (max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
    if (!(relative_residual_tolerance > 0.0 && relative_residual_tolerance < 1.0))
      throw ValidationError("relative_residual_tolerance must lie in (0, 1)");
  }
};

struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;
  double functional = 0.0;
};

struct SolveReport {
  int iterations = 0;
  double final_residual = 0.0;  // relative to the load norm
  double functional_value = 0.0;
  double wall_time = 0.0;       // seconds
  std::vector<IterationRecord> history;
  bool converged = false;
};

namespace detail {

using LinearOp = std::function<Vector(const Vector&)>;

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. Returns the last iterate; `indefinite` throws on p^T A p <= 0.
/// History entries carry the relative residual and the quadratic value
/// 1/2 x^T A x - b^T x.
inline Vector pcg(const LinearOp& apply, const LinearOp& precond, const Vector& b,
                  const Vector& x0, double tol, int max_iter, SolveReport& rep) {
  Vector x = x0;
  Vector r = b - apply(x);
  const double bnorm = b.norm();
  auto quad = [&](const Vector& xv, const Vector& rv) { return -0.5 * xv.dot(b + rv); };
  rep.history.clear();
  rep.history.push_back({0, bnorm > 0 ? r.norm() / bnorm : r.norm(), quad(x, r)});
  rep.iterations = 0;
  if (r.norm() <= tol * bnorm || bnorm == 0.0) {
    rep.converged = r.norm() <= tol * bnorm || r.norm() == 0.0;
    rep.final_residual = rep.history.back().residual;
    return x;
  }
  Vector z = precond(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int k = 1; k <= max_iter; ++k) {
    const Vector Ap = apply(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
      throw SolverError("indefinite operator detected during conjugate gradients (p^T A p = " +
                        std::to_string(pAp) + ")");
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    rep.iterations = k;
    rep.history.push_back({k, r.norm() / bnorm, quad(x, r)});
    if (r.norm() <= tol * bnorm) {
      rep.converged = true;
      break;
    }
    z = precond(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  // Guard against drift of the recursive residual.
  r = b - apply(x);
  rep.final_residual = r.norm() / bnorm;
  rep.converged = rep.converged && rep.final_residual <= 10.0 * tol;
  return x;
}

/// Inverses of the diagonal blocks of H, one per group.
class BlockJacobi {
 public:
  BlockJacobi(const SparseMatrix& H, const std::vector<int>& groups) {
    std::map<int, std::vector<Eigen::Index>> by_group;
    for (std::size_t i = 0; i < groups.size(); ++i)
      by_group[groups[i]].push_back(static_cast<Eigen::Index>(i));
    for (auto& [g, idx] : by_group) {
      Matrix blk(idx.size(), idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) blk(i, j) = H.coeff(idx[i], idx[j]);
      Eigen::LDLT<Matrix> ldlt(blk);
      Matrix inv;
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && blk.diagonal().minCoeff() > 0.0) {
        inv = ldlt.solve(Matrix::Identity(blk.rows(), blk.cols()));
      } else {
        inv = Matrix::Identity(blk.rows(), blk.cols());
      }
      index_.push_back(std::move(idx));
      inverse_.push_back(std::move(inv));
    }
  }

  Vector apply(const Vector& r) const {
    Vector z(r.size());
    for (std::size_t g = 0; g < index_.size(); ++g) {
      const auto& idx = index_[g];
      Vector rg(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) rg(i) = r(idx[i]);
      const Vector zg = inverse_[g] * rg;
      for (std::size_t i = 0; i < idx.size(); ++i) z(idx[i]) = zg(i);
    }
    return z;
  }

 private:
  std::vector<std::vector<Eigen::Index>> index_;
  std::vector<Matrix> inverse_;
};

}  // namespace detail

/// Minimizes the discrete functional by (block-Jacobi preconditioned) conjugate
/// gradients. On non-convergence the last iterate is returned with
/// `converged == false`.
inline std::pair<Vector, SolveReport> minimize_cg_unknowns(const DiscreteProblem& p,
                                                            const SolveOptions& opts) {
  opts.validate();
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  const auto n = p.num_unknowns();
  Vector z0 = Vector::Zero(n);
  if (opts.random_start) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double s = std::max(1.0, p.rhs().norm() / std::max<double>(1.0, std::sqrt(double(n))));
    for (Eigen::Index i = 0; i < n; ++i) z0(i) = s * nd(rng);
  }
  const SparseMatrix& H = p.hessian();
  detail::LinearOp apply = [&H](const Vector& v) -> Vector { return H * v; };
  detail::LinearOp precond = [](const Vector& v) -> Vector { return v; };
  std::optional<detail::BlockJacobi> bj;
  if (opts.preconditioner == Preconditioner::block_jacobi) {
    bj.emplace(H, p.groups());
    precond = [&bj](const Vector& v) -> Vector { return bj->apply(v); };
  }
  Vector z;
  if (p.rhs().norm() == 0.0) {
    z = Vector::Zero(n);
    rep.converged = true;
    rep.history.push_back({0, 0.0, 0.0});
  } else {
    z = detail::pcg(apply, precond, p.rhs(), z0, opts.relative_residual_tolerance,
                    opts.max_iterations, rep);
  }
  for (auto& h : rep.history) h.functional += p.constant();
  rep.functional_value = p.objective(z);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {z, rep};
}

inline std::pair<FieldState, SolveReport> minimize_cg(const DiscreteProblem& p,
                                                      const SolveOptions& opts = {}) {
  auto [z, rep] = minimize_cg_unknowns(p, opts);
  return {p.field_state(z), rep};
}

// Complex oracle -------------------------------------------------------------------

namespace detail {

using CSparse = Eigen::SparseMatrix<Complex>;

inline CSparse complex_block_diag(const std::vector<CMatrix>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  std::vector<Eigen::Triplet<Complex>> t;
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        if (b(i, j) != Complex(0.0)) t.emplace_back(off + i, off + j, b(i, j));
    off += b.rows();
  }
  CSparse m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Real-equivalent system of the complex discrete equations
/// K phi + beta B t = s with the boundary selections as extra rows.
/// Unknown order: Re phi, Im phi, Re t, Im t.
struct OracleSystem {
  SparseMatrix matrix;
  Vector rhs;
  CSparse K;
  CSparse X_cell;
};

inline OracleSystem oracle_system(const DiscreteProblem& p) {
  const Discretization& d = p.disc();
  const MaterialField& mat = p.material();
  const double w = p.omega();
  const Complex I(0.0, 1.0);
  const auto nx = d.num_phi(), nt = d.num_trace();
  const CSparse Gc = d.grad().cast<Complex>();
  const CSparse Wc = sparse_diag(d.cell_weight()).cast<Complex>();
  const CSparse Wn = sparse_diag(d.node_weight()).cast<Complex>();
  const CSparse X = complex_block_diag(mat.cell);
  const CSparse Y = complex_block_diag(mat.node);
  const CSparse K = CSparse(Gc.transpose() * Wc * X * Gc) - CSparse(Complex(w * w) * (Wn * Y));
  Complex beta;
  CVector s;
  const CVector& f = p.source().force;
  switch (p.physics()) {
    case Physics::elastic:
      beta = -1.0;
      s = Wn * f;
      break;
    case Physics::acoustic:
      beta = I * w;
      s = Gc.transpose() * (Wc * (X * f));
      break;
    case Physics::electromagnetic:
      beta = -I * w;
      s = I * w * (Wn * f);
      break;
  }
  const CSparse Bt = beta * d.boundary_map().cast<Complex>();
  std::vector<Triplet> t;
  auto put = [&](const CSparse& m, Eigen::Index r0, Eigen::Index c_re, Eigen::Index c_im) {
    // Rows r0..: real part equations; rows r0+m.rows(): imaginary part.
    for (int k = 0; k < m.outerSize(); ++k)
      for (CSparse::InnerIterator it(m, k); it; ++it) {
        const double a = it.value().real(), b = it.value().imag();
        t.emplace_back(r0 + it.row(), c_re + it.col(), a);
        t.emplace_back(r0 + it.row(), c_im + it.col(), -b);
        t.emplace_back(r0 + m.rows() + it.row(), c_re + it.col(), b);
        t.emplace_back(r0 + m.rows() + it.row(), c_im + it.col(), a);
      }
  };
  // Complex equations stacked as [Re rows; Im rows].
  const Eigen::Index c_phi_re = 0, c_phi_im = nx, c_t_re = 2 * nx, c_t_im = 2 * nx + nt;
  put(K, 0, c_phi_re, c_phi_im);
  put(Bt, 0, c_t_re, c_t_im);
  Vector rhs = Vector::Zero(2 * nx + 2 * nt);
  rhs.head(nx) = s.real();
  rhs.segment(nx, nx) = s.imag();
  const bool elastic = p.physics() == Physics::elastic;
  const Eigen::Index c_tF = elastic ? c_t_re : c_t_im;
  const Eigen::Index c_tG = elastic ? c_t_im : c_t_re;
  const int nphi = d.nphi();
  Eigen::Index row = 2 * nx;
  const auto& dofs = p.source().bc.dofs;
  for (Eigen::Index i = 0; i < nt; ++i) {
    const Eigen::Index xi = d.mesh().boundary_nodes[i / nphi] * nphi + i % nphi;
    if (dofs[i].first == PotentialChoice::prescribe_potential)
      t.emplace_back(row, c_phi_re + xi, 1.0);
    else
      t.emplace_back(row, c_tG + i, 1.0);
    rhs(row++) = dofs[i].first_value;
    if (dofs[i].second == FluxChoice::prescribe_flux)
      t.emplace_back(row, c_tF + i, 1.0);
    else
      t.emplace_back(row, c_phi_im + xi, 1.0);
    rhs(row++) = dofs[i].second_value;
  }
  SparseMatrix M(2 * nx + 2 * nt, 2 * nx + 2 * nt);
  M.setFromTriplets(t.begin(), t.end());
  return {M, rhs, K, X};
}

}  // namespace detail

/// Direct solve of the complex discrete field equations with the same boundary
/// selections; independent of the minimization route.
inline ComplexSolution solve_direct_complex(const DiscreteProblem& p) {
  const Discretization& d = p.disc();
  if (d.num_phi() + d.num_trace() > 50000)
    throw ValidationError("solve_direct_complex: system exceeds desk scale");
  const auto sys = detail::oracle_system(p);
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(sys.matrix);
  if (lu.info() != Eigen::Success)
    throw SolverError("solve_direct_complex: singular system (discrete resonance)");
  const Vector sol = lu.solve(sys.rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite())
    throw SolverError("solve_direct_complex: singular system (discrete resonance)");
  const auto nx = d.num_phi(), nt = d.num_trace();
  const Complex I(0.0, 1.0);
  const double w = p.omega();
  ComplexSolution s;
  s.physics = p.physics();
  s.potential = sol.head(nx).cast<Complex>() + I * sol.segment(nx, nx).cast<Complex>();
  s.trace = sol.segment(2 * nx, nt).cast<Complex>() + I * sol.segment(2 * nx + nt, nt).cast<Complex>();
  const detail::CSparse Gc = d.grad().cast<Complex>();
  const CVector grad = Gc * s.potential;
  switch (p.physics()) {
    case Physics::elastic:
      s.aux = grad;
      break;
    case Physics::acoustic:
      s.aux = (p.source().force - grad) / (I * w);
      break;
    case Physics::electromagnetic:
      s.aux = grad / (I * w);
      break;
  }
  s.flux = sys.X_cell * s.aux;
  return s;
}

/// Smallest singular value of the oracle matrix (dense; small problems only).
inline double oracle_min_singular_value(const DiscreteProblem& p) {
  const Matrix M(detail::oracle_system(p).matrix);
  return Eigen::JacobiSVD<Matrix>(M).singularValues().minCoeff();
}

// Cross validation ------------------------------------------------------------------

struct CrossValidation {
  double potential_error = 0.0;  // relative
  double flux_error = 0.0;
  double trace_error = 0.0;
  double functional_discrepancy = 0.0;
  std::optional<double> boundary_identity_discrepancy;  // zero source only
};

inline double relative_error(const CVector& a, const CVector& ref) {
  const double n = ref.norm();
  const double e = (a - ref).norm();
  return n > 0 ? e / n : e;
}

/// Compares a minimization result (F) with an oracle solution of the same problem.
inline CrossValidation cross_validate(const FieldState& F, const ComplexSolution& oracle,
                                      const DiscreteProblem& p) {
  const Vector G = p.dual_field(F.values);
  const ComplexSolution cg = complex_from_fields(F, G, p.disc(), p.source().force, p.omega());
  CrossValidation out;
  out.potential_error = relative_error(cg.potential, oracle.potential);
  out.flux_error = relative_error(cg.flux, oracle.flux);
  out.trace_error = relative_error(cg.trace, oracle.trace);
  const FieldState Fo = field_from_complex(oracle, p.disc(), p.source().force, p.omega());
  const double j_cg = evaluate_functional(F, p).total;
  const double j_or = evaluate_functional(Fo, p).total;
  out.functional_discrepancy = std::abs(j_cg - j_or) / std::max(1e-300, std::abs(j_or) + std::abs(j_cg)) * 2.0;
  if (j_cg == j_or) out.functional_discrepancy = 0.0;
  const CVector& f = p.source().force;
  if (f.size() == 0 || f.cwiseAbs().maxCoeff() == 0.0) {
    const double surf = minimum_value_surface(surface_data(cg, p), p.omega());
    out.boundary_identity_discrepancy =
        std::abs(j_cg - surf) / std::max({std::abs(j_cg), std::abs(surf), 1e-300});
    if (j_cg == surf) out.boundary_identity_discrepancy = 0.0;
  }
  return out;
}

// Rotation-aware driver ------------------------------------------------------------

struct RotationOptions {
  enum class Mode { none, fixed, automatic };
  Mode mode = Mode::none;
  double theta = 0.0;
};

/// Global phase rotation of moduli and data; the complex fields of the
/// original problem are recovered by unrotate().
inline ProblemSpec rotate_problem(const ProblemSpec& spec, double theta) {
  if (theta == 0.0) return spec;
  if (spec.g0) throw ValidationError("rotation requires canonical boundary data, not a custom G0");
  ProblemSpec out = spec;
  const Complex e = std::polar(1.0, theta);
  const Complex em = std::conj(e);
  for (auto& r : out.regions) r = rotate_moduli(r, theta).moduli;
  for (auto& bc : out.boundary) {
    if (bc.kind == SideCondition::Kind::selection)
      throw ValidationError("rotation needs complex Dirichlet or Neumann data on side '" + bc.side + "'");
    const bool dir = bc.kind == SideCondition::Kind::dirichlet;
    switch (spec.physics) {
      case Physics::elastic:
        if (!dir) bc.value *= e;
        break;
      case Physics::acoustic:
        if (dir) bc.value *= em;
        break;
      case Physics::electromagnetic:
        if (!dir) bc.value *= e;
        break;
    }
  }
  if (out.force.size()) out.force *= spec.physics == Physics::acoustic ? em : e;
  return out;
}

inline ComplexSolution unrotate(ComplexSolution s, double theta) {
  if (theta == 0.0) return s;
  const Complex e = std::polar(1.0, theta);
  const Complex em = std::conj(e);
  switch (s.physics) {
    case Physics::elastic:
      s.flux *= em;
      s.trace *= em;
      break;
    case Physics::acoustic:
      s.potential *= e;
      s.aux *= e;
      break;
    case Physics::electromagnetic:
      s.flux *= em;
      s.trace *= em;
      break;
  }
  return s;
}

struct Solution {
  std::shared_ptr<DiscreteProblem> problem;  // rotated problem actually minimized
  FieldState F;
  Vector G;
  ComplexSolution fields;  // fields of the original (unrotated) problem
  MaterialField material;  // original moduli
  SolveReport report;
  double theta = 0.0;
};

inline double resolve_rotation(const ProblemSpec& spec, const RotationOptions& rot) {
  switch (rot.mode) {
    case RotationOptions::Mode::none: return 0.0;
    case RotationOptions::Mode::fixed: return rot.theta;
    case RotationOptions::Mode::automatic: {
      const RotationChoice c = choose_rotation(std::span<const ComplexModuli>(spec.regions));
      if (!c.passive) {
        std::string regs;
        for (auto r : c.failing_regions) regs += (regs.empty() ? "" : ", ") + std::to_string(r);
        throw PassivityError("rotation", "no rotation makes all regions strictly passive; failing regions: " + regs);
      }
      return c.theta;
    }
  }
  return 0.0;
}

/// Builds, minimizes and converts back to complex fields.
inline Solution solve(const ProblemSpec& spec, const SolveOptions& opts = {},
                      const RotationOptions& rot = {}) {
  Solution out;
  out.theta = resolve_rotation(spec, rot);
  out.problem = std::make_shared<DiscreteProblem>(rotate_problem(spec, out.theta));
  const DiscreteProblem& p = *out.problem;
  auto [F, rep] = minimize_cg(p, opts);
  out.F = F;
  out.report = rep;
  out.G = p.dual_field(F.values);
  out.fields = unrotate(complex_from_fields(F, out.G, p.disc(), p.source().force, p.omega()), out.theta);
  out.material = MaterialField::build(*spec.mesh, spec.physics, spec.omega, spec.regions);
  return out;
}

}  // namespace wavemin
