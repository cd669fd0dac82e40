// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "wavemin/fields.hpp"

namespace wavemin {

/// User-level description of a boundary value problem.
struct ProblemSpec {
  std::shared_ptr<const Mesh> mesh;
  Physics physics = Physics::elastic;
  double omega = 1.0;
  std::vector<ComplexModuli> regions;
  CVector force;  // empty means zero
  std::vector<SideCondition> boundary;
  std::optional<Vector> g0;  // canonical admissible data when absent
};

/// Discrete minimization problem J(z) = 1/2 z^T H z - b^T z + j0 over the free
/// primary unknowns z, with F = A z + c.
///
/// When every dual modulus is real the dual unknown is eliminated pointwise and
/// the second quadratic block is dropped (reduced form).
class DiscreteProblem {
 public:
  explicit DiscreteProblem(const ProblemSpec& spec)
      : disc_(spec.mesh, spec.physics), layout_(disc_), omega_(spec.omega) {
    if (!(omega_ > 0.0)) throw ValidationError("frequency omega must be positive");
    material_ = MaterialField::build(disc_.mesh(), spec.physics, omega_, spec.regions);
    CVector force = spec.force.size() ? spec.force : CVector::Zero(force_size(disc_));
    const BoundarySpec bc = make_boundary_spec(disc_, spec.boundary);
    src_ = spec.g0 ? make_source_data(disc_, force, bc, *spec.g0, omega_)
                   : build_source_data(disc_, force, bc, omega_);
    init();
  }

  DiscreteProblem(const Discretization& d, const MaterialField& mat, const SourceData& src)
      : disc_(d), layout_(d), material_(mat), src_(src), omega_(mat.omega) {
    init();
  }

  const Discretization& disc() const { return disc_; }
  const Mesh& mesh() const { return disc_.mesh(); }
  const FieldLayout& layout() const { return layout_; }
  const MaterialField& material() const { return material_; }
  const SourceData& source() const { return src_; }
  Physics physics() const { return disc_.physics(); }
  double omega() const { return omega_; }
  bool reduced() const { return reduced_; }

  const SparseMatrix& L() const { return L_; }
  const Vector& weights() const { return W_; }
  const TrialMap& trial() const { return trial_; }
  const SparseMatrix& A() const { return A_; }
  const Vector& c() const { return c_; }
  const SparseMatrix& hessian() const { return H_; }
  const Vector& rhs() const { return b_; }
  double constant() const { return j0_; }
  Eigen::Index num_unknowns() const { return A_.cols(); }
  /// Block-Jacobi group of each unknown (one group per node, cell or boundary node).
  const std::vector<int>& groups() const { return group_; }

  Vector field(const Vector& z) const { return A_ * z + c_; }
  FieldState field_state(const Vector& z) const { return {layout_, field(z)}; }
  double objective(const Vector& z) const { return 0.5 * z.dot(H_ * z) - b_.dot(z) + j0_; }
  Vector gradient(const Vector& z) const { return H_ * z - b_; }

  /// G = L F. In the reduced form the second block is the limit (-X' mu, mu)
  /// of L F, with the multiplier mu fixed by stationarity with respect to
  /// every free primary unknown.
  Vector dual_field(const Vector& F) const {
    Vector G = L_ * F;
    if (!reduced_) return G;
    const FieldLayout& lay = layout_;
    const auto n2 = lay.n2 * lay.s2;
    std::vector<Triplet> et;
    const auto& dual = material_.dual();
    for (Eigen::Index e = 0; e < lay.n2; ++e) {
      const Matrix xr = dual[e].real();
      for (Eigen::Index i = 0; i < lay.s2; ++i) {
        et.emplace_back(lay.offset(3) + e * lay.s2 + i, e * lay.s2 + i, 1.0);
        for (Eigen::Index j = 0; j < lay.s2; ++j)
          if (xr(i, j) != 0.0) et.emplace_back(lay.offset(2) + e * lay.s2 + i, e * lay.s2 + j, -xr(i, j));
      }
    }
    SparseMatrix E(lay.size(), n2);
    E.setFromTriplets(et.begin(), et.end());
    const SparseMatrix Af = trial_.A * P_full_;
    const SparseMatrix AtW = Af.transpose() * detail::sparse_diag(W_);
    const SparseMatrix M = AtW * E;
    const Vector rhs = AtW * (src_.g0 - G);
    const SparseMatrix MtM = M.transpose() * M;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(MtM);
    if (ldlt.info() != Eigen::Success) throw SolverError("reduced form: multiplier system is singular");
    const Vector mu = ldlt.solve(M.transpose() * rhs);
    return G + E * mu;
  }

  /// Free unknowns of a completed field.
  Vector unknowns_of(const FieldState& F) const {
    const Vector s = primary_from_field(F, omega_).stacked();
    Vector z(static_cast<Eigen::Index>(source_index_.size()));
    for (std::size_t j = 0; j < source_index_.size(); ++j) z(j) = s(source_index_[j]);
    return z;
  }

  /// Same discretization and constraints with another operator (comparison medium).
  DiscreteProblem with_operator(const SparseMatrix& L) const {
    if (reduced_) throw ValidationError("with_operator: the reduced form is tied to its dual modulus");
    if (L.rows() != L_.rows() || L.cols() != L_.cols())
      throw ValidationError("with_operator: operator size does not match the layout");
    DiscreteProblem p = *this;
    p.L_ = L;
    p.refresh();
    return p;
  }

  /// Same problem with the load G0 replaced.
  DiscreteProblem with_load(const Vector& g) const {
    DiscreteProblem p = *this;
    p.src_.g0 = g;
    p.refresh();
    return p;
  }

  /// Same problem with homogeneous boundary data and zero source.
  DiscreteProblem homogeneous() const {
    DiscreteProblem p = *this;
    p.src_.force.setZero();
    for (auto& d : p.src_.bc.dofs) d.first_value = d.second_value = 0.0;
    p.src_.g0.setZero();
    p.trial_.c.setZero();
    p.build_reduction();
    p.refresh();
    return p;
  }

 private:
  void init() {
    reduced_ = material_.dual_lossless();
    W_ = layout_.weights(disc_.mesh());
    L_ = assemble_operator(layout_, material_, reduced_);
    trial_ = build_trial_map(disc_, layout_, src_.force, omega_);
    build_reduction();
    refresh();
  }

  void refresh() {
    A_ = trial_.A * P_;
    c_ = trial_.A * p0_ + trial_.c;
    const SparseMatrix WL = detail::sparse_diag(W_) * L_;
    H_ = SparseMatrix(A_.transpose() * WL * A_);
    H_ = 0.5 * (H_ + SparseMatrix(H_.transpose()));
    const Vector Lc = L_ * c_;
    b_ = A_.transpose() * W_.cwiseProduct(src_.g0 - Lc);
    j0_ = W_.dot(-src_.g0.cwiseProduct(c_) + 0.5 * c_.cwiseProduct(Lc));
  }

  // (x, y, t) = P z + p0.
  void build_reduction() {
    const auto nx = disc_.num_phi(), ny = disc_.num_q(), nt = disc_.num_trace();
    const int nphi = disc_.nphi();
    const Mesh& m = disc_.mesh();
    const auto& dofs = src_.bc.dofs;
    Vector x0 = Vector::Zero(nx), t0 = Vector::Zero(nt);
    std::vector<char> x_fixed(nx, 0), t_fixed(nt, 0), t_elim(nt, 0);
    for (Eigen::Index i = 0; i < nt; ++i) {
      const Eigen::Index node = m.boundary_nodes[i / nphi];
      const Eigen::Index xi = node * nphi + i % nphi;
      if (dofs[i].first == PotentialChoice::prescribe_potential) {
        x_fixed[xi] = 1;
        x0(xi) = dofs[i].first_value;
      }
      if (dofs[i].second == FluxChoice::prescribe_flux) {
        t_fixed[i] = 1;
        t0(i) = dofs[i].second_value;
      }
    }
    source_index_.clear();
    group_.clear();
    const auto node_group = [&](Eigen::Index n) { return static_cast<int>(n); };
    const auto cell_group = [&](Eigen::Index c) { return static_cast<int>(m.num_nodes() + c); };
    const auto bdy_group = [&](Eigen::Index b) {
      return static_cast<int>(m.num_nodes() + m.num_cells() + b);
    };
    std::vector<Triplet> trips;
    Eigen::Index col = 0;
    auto add_free = [&](Eigen::Index stacked, int group) {
      trips.emplace_back(stacked, col, 1.0);
      source_index_.push_back(stacked);
      group_.push_back(group);
      ++col;
    };

    for (Eigen::Index i = 0; i < nx; ++i)
      if (!x_fixed[i]) add_free(i, node_group(i / nphi));
    for (Eigen::Index i = 0; i < ny; ++i) add_free(nx + i, cell_group(i / disc_.nq()));
    for (Eigen::Index i = 0; i < nt; ++i)
      if (!t_fixed[i]) add_free(nx + ny + i, bdy_group(i / nphi));
    P_.resize(nx + ny + nt, col);
    P_.setFromTriplets(trips.begin(), trips.end());
    p0_.resize(nx + ny + nt);
    p0_ << x0, Vector::Zero(ny), t0;
    P_full_ = P_;
    if (!reduced_) return;
    source_index_.clear();
    group_.clear();

    const auto& dual = material_.dual();
    if (physics() == Physics::elastic) {
      // z = (y, free t); t at prescribed-displacement nodes balances the
      // momentum equation, and u' = -rho'^-1 (div + f') / w^2.
      for (Eigen::Index i = 0; i < nt; ++i) {
        if (dofs[i].first != PotentialChoice::prescribe_potential) continue;
        if (t_fixed[i])
          throw ValidationError("reduced form: displacement and traction both prescribed at node " +
                                std::to_string(m.boundary_nodes[i / nphi]));
        t_elim[i] = 1;
      }
      for (Eigen::Index b = 0; b < m.num_boundary(); ++b) {
        int count = 0;
        for (int k = 0; k < nphi; ++k) count += t_elim[b * nphi + k];
        const Matrix rho = dual[m.boundary_nodes[b]].real();
        const Matrix off = rho - Matrix(rho.diagonal().asDiagonal());
        if (count > 0 && count < nphi && detail::max_abs(off) > 0.0)
          throw ValidationError("reduced form: partial displacement data needs a diagonal density");
      }
      const SparseMatrix GtWc = disc_.grad().transpose() * detail::sparse_diag(disc_.cell_weight());
      const SparseMatrix BtGtWc = disc_.boundary_map().transpose() * GtWc;
      // Stage 1: (y, t) = P1 z + q1.
      std::vector<Triplet> t1;
      Eigen::Index c1 = 0;
      for (Eigen::Index i = 0; i < ny; ++i) {
        t1.emplace_back(i, c1++, 1.0);
        source_index_.push_back(nx + i);
        group_.push_back(cell_group(i / disc_.nq()));
      }
      Vector q1 = Vector::Zero(ny + nt);
      const CVector& f = src_.force;
      for (Eigen::Index i = 0; i < nt; ++i) {
        if (t_fixed[i]) {
          q1(ny + i) = t0(i);
        } else if (!t_elim[i]) {
          t1.emplace_back(ny + i, c1++, 1.0);
          source_index_.push_back(nx + ny + i);
          group_.push_back(bdy_group(i / nphi));
        }
      }
      for (Eigen::Index b = 0; b < m.num_boundary(); ++b) {
        const Eigen::Index node = m.boundary_nodes[b];
        Vector g = Vector::Zero(nphi);
        for (int k = 0; k < nphi; ++k)
          if (t_elim[b * nphi + k]) g(k) = x0(node * nphi + k);
        const Vector rg = dual[node].real() * g;
        for (int k = 0; k < nphi; ++k) {
          const Eigen::Index i = b * nphi + k;
          if (!t_elim[i]) continue;
          q1(ny + i) = m.node_volume(node) *
                       (-omega_ * omega_ * rg(k) - f(node * nphi + k).real());
          for (Eigen::Index j = 0; j < ny; ++j) {
            const double v = BtGtWc.coeff(i, j);
            if (v != 0.0) t1.emplace_back(ny + i, j, v);
          }
        }
      }
      SparseMatrix P1(ny + nt, c1);
      P1.setFromTriplets(t1.begin(), t1.end());
      // Stage 2: x = X (y, t) + x_f.
      std::vector<Matrix> rinv;
      for (Eigen::Index n = 0; n < m.num_nodes(); ++n)
        rinv.push_back(detail::inverse(dual[n].real(), "reduced form density"));
      const SparseMatrix Rinv = detail::sparse_block_diag(rinv);
      detail::BlockAssembler xa({nx}, {ny, nt});
      xa.add(0, 0, SparseMatrix(Rinv * disc_.div_q()), -1.0 / (omega_ * omega_));
      xa.add(0, 1, SparseMatrix(Rinv * disc_.div_t()), -1.0 / (omega_ * omega_));
      const SparseMatrix X = xa.build();
      const Vector xf = -(Rinv * f.real()) / (omega_ * omega_);
      detail::BlockAssembler pa({nx, ny + nt}, {c1});
      pa.add(0, 0, SparseMatrix(X * P1));
      pa.add(1, 0, P1);
      P_ = pa.build();
      p0_.resize(nx + ny + nt);
      p0_ << X * q1 + xf, q1;
      return;
    }

    // Acoustic and EM: z = (free x, free t); y follows pointwise from x.
    std::vector<Triplet> tx;
    Eigen::Index cx = 0;
    for (Eigen::Index i = 0; i < nx; ++i)
      if (!x_fixed[i]) {
        tx.emplace_back(i, cx++, 1.0);
        source_index_.push_back(i);
        group_.push_back(node_group(i / nphi));
      }
    SparseMatrix Sx(nx, cx);
    Sx.setFromTriplets(tx.begin(), tx.end());
    std::vector<Triplet> tt;
    Eigen::Index ct = 0;
    for (Eigen::Index i = 0; i < nt; ++i)
      if (!t_fixed[i]) {
        tt.emplace_back(i, ct++, 1.0);
        source_index_.push_back(nx + ny + i);
        group_.push_back(bdy_group(i / nphi));
      }
    SparseMatrix St(nt, ct);
    St.setFromTriplets(tt.begin(), tt.end());
    std::vector<Matrix> xr;
    for (const auto& d : dual) xr.push_back(d.real());
    const SparseMatrix R = detail::sparse_block_diag(xr);
    SparseMatrix Y;
    Vector y0;
    if (physics() == Physics::acoustic) {
      Y = R * disc_.grad() / omega_;
      y0 = -(R * src_.force.real()) / omega_;
    } else {
      Y = -(R * disc_.grad()) / omega_;
      y0 = Vector::Zero(ny);
    }
    detail::BlockAssembler pa({nx, ny, nt}, {cx, ct});
    pa.add(0, 0, Sx);
    pa.add(1, 0, SparseMatrix(Y * Sx));
    pa.add(2, 1, St);
    P_ = pa.build();
    p0_.resize(nx + ny + nt);
    p0_ << x0, Y * x0 + y0, t0;
  }

  Discretization disc_;
  FieldLayout layout_;
  MaterialField material_;
  SourceData src_;
  double omega_ = 1.0;
  bool reduced_ = false;
  SparseMatrix L_;
  Vector W_;
  TrialMap trial_;
  SparseMatrix P_;
  SparseMatrix P_full_;  // selection of free unknowns without the reduction
  Vector p0_;
  SparseMatrix A_;
  Vector c_;
  SparseMatrix H_;
  Vector b_;
  double j0_ = 0.0;
  std::vector<Eigen::Index> source_index_;
  std::vector<int> group_;
};

// Functional values -----------------------------------------------------------------

struct FunctionalValue {
  double volume_term = 0.0;
  double boundary_term = 0.0;
  double total = 0.0;
};

/// sum W (-G0 . F + 1/2 F . L F).
inline FunctionalValue evaluate_functional(const FieldState& F, const SparseMatrix& L,
                                           const Vector& weights, const Vector& g0) {
  if (F.values.size() != L.rows() || weights.size() != F.values.size() || g0.size() != F.values.size())
    throw ValidationError("evaluate_functional: mesh mismatch");
  const Vector LF = L * F.values;
  const double v = weights.dot(-g0.cwiseProduct(F.values) + 0.5 * F.values.cwiseProduct(LF));
  return {v, 0.0, v};
}

inline FunctionalValue evaluate_functional(const FieldState& F, const DiscreteProblem& p) {
  return evaluate_functional(F, p.L(), p.weights(), p.source().g0);
}

/// Integrated-by-parts form: volume part uses only the imaginary (EM: real)
/// source, boundary part only the boundary values of the dual data. Differs
/// from evaluate_functional by a data-only constant.
inline FunctionalValue evaluate_boundary_form(const FieldState& F, const DiscreteProblem& p) {
  const FieldLayout& lay = p.layout();
  if (F.values.size() != lay.size()) throw ValidationError("evaluate_boundary_form: mesh mismatch");
  const Discretization& d = p.disc();
  const double w = p.omega();
  const Vector& g0 = p.source().g0;
  const double quad = 0.5 * p.weights().dot(F.values.cwiseProduct(p.L() * F.values));
  const Primary pr = primary_from_field(F, w);
  const Vector BT = d.boundary_map().transpose() * pr.x;                        // real potential
  const Vector phi0 = d.boundary_map().transpose() * potential_of_dual(g0, lay, w);  // dual target
  const Vector t0 = lay.comp(g0, 4);
  const CVector& f = p.source().force;
  FunctionalValue out;
  switch (p.physics()) {
    case Physics::elastic:
      out.volume_term = -d.node_weight().dot(f.imag().cwiseProduct(pr.x)) + quad;
      out.boundary_term = -BT.dot(t0) + phi0.dot(pr.t);
      break;
    case Physics::acoustic:
      out.volume_term = -w * d.cell_weight().dot(f.imag().cwiseProduct(pr.y)) + quad;
      out.boundary_term = w * (BT.dot(t0) + phi0.dot(pr.t));
      break;
    case Physics::electromagnetic:
      out.volume_term = d.node_weight().dot(f.real().cwiseProduct(pr.x)) / w + quad;
      out.boundary_term = (t0.dot(BT) + phi0.dot(pr.t)) / w;
      break;
  }
  out.total = out.volume_term + out.boundary_term;
  return out;
}

/// Gradient of J with respect to the free primary unknowns at a completed field.
inline Vector gradient(const FieldState& F, const DiscreteProblem& p) {
  return p.gradient(p.unknowns_of(F));
}

// Boundary-only formulas ------------------------------------------------------------

/// Boundary traces: complex potential and integrated complex flux at boundary
/// dofs, plus the dual targets (u''0, sigma''0 n and analogues).
struct SurfaceData {
  Physics physics = Physics::elastic;
  CVector potential;
  CVector flux;
  Vector target_potential;
  Vector target_flux;
};

inline SurfaceData surface_data(const ComplexSolution& s, const DiscreteProblem& p) {
  const Discretization& d = p.disc();
  const auto& B = d.boundary_map();
  SurfaceData out;
  out.physics = p.physics();
  out.potential = B.transpose().cast<Complex>() * s.potential;
  out.flux = s.trace;
  out.target_potential = B.transpose() * potential_of_dual(p.source().g0, p.layout(), p.omega());
  out.target_flux = p.layout().comp(p.source().g0, 4);
  return out;
}

/// Minimum value of the functional from boundary traces alone (zero source).
inline double minimum_value_surface(const SurfaceData& s, double omega, double source_norm = 0.0) {
  if (source_norm != 0.0)
    throw ValidationError("minimum_value_surface requires zero source; evaluate the volume functional");
  const auto n = s.potential.size();
  if (s.flux.size() != n || s.target_potential.size() != n || s.target_flux.size() != n)
    throw ValidationError("minimum_value_surface: surface data sizes differ");
  const Vector u1 = s.potential.real(), u2 = s.potential.imag();
  const Vector t1 = s.flux.real(), t2 = s.flux.imag();
  const Vector& p0 = s.target_potential;
  const Vector& f0 = s.target_flux;
  switch (s.physics) {
    case Physics::elastic:
      return 0.5 * (u1.dot(t2 - 2.0 * f0) + (2.0 * p0 - u2).dot(t1));
    case Physics::acoustic:
      return 0.5 * omega * (u1.dot(2.0 * f0 - t1) + (2.0 * p0 - u2).dot(t2));
    case Physics::electromagnetic:
      return 0.5 / omega * (u1.dot(2.0 * f0 - t1) + (2.0 * p0 - u2).dot(t2));
  }
  return 0.0;
}

/// Slack of the boundary-measurement bound for a trial field (zero source):
/// nonnegative for every trial when the measurements come from the medium in L.
inline double tomography_slack(const FieldState& trial, const SurfaceData& measured,
                               const DiscreteProblem& p) {
  const auto n = p.disc().num_trace();
  if (measured.potential.size() != n || measured.flux.size() != n)
    throw ValidationError("tomography_slack: incomplete surface data");
  if (p.source().force.size() && p.source().force.cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("tomography_slack requires zero source");
  const double w = p.omega();
  const double quad = 0.5 * p.weights().dot(trial.values.cwiseProduct(p.L() * trial.values));
  const Primary tp = primary_from_field(trial, w);
  const Vector ux = p.disc().boundary_map().transpose() * tp.x;
  const Vector& tt = tp.t;
  const Vector u1 = measured.potential.real(), u2 = measured.potential.imag();
  const Vector t1 = measured.flux.real(), t2 = measured.flux.imag();
  double rhs = 0.0;
  switch (p.physics()) {
    case Physics::elastic:
      rhs = 0.5 * ((2.0 * ux - u1).dot(t2) + u2.dot(t1 - 2.0 * tt));
      break;
    case Physics::acoustic:
      rhs = 0.5 * w * ((u1 - 2.0 * ux).dot(t1) + u2.dot(t2 - 2.0 * tt));
      break;
    case Physics::electromagnetic:
      rhs = 0.5 / w * (-t1.dot(2.0 * ux - u1) + u2.dot(t2 - 2.0 * tt));
      break;
  }
  return quad - rhs;
}

// Dissipation ---------------------------------------------------------------------

struct DissipationReport {
  double mean_power = 0.0;
  double stiffness_part = 0.0;  // primal modulus: C, k or eps
  double inertial_part = 0.0;   // dual modulus: rho, r or m
};

namespace detail {
/// sum_e vol_e z_e^H X_e z_e for blocks of size s.
inline double weighted_form(const CVector& z, const std::vector<Matrix>& x, const Vector& vol) {
  double acc = 0.0;
  Eigen::Index off = 0;
  for (std::size_t e = 0; e < x.size(); ++e) {
    const auto s = x[e].rows();
    const CVector ze = z.segment(off, s);
    acc += vol(static_cast<Eigen::Index>(e)) *
           (ze.real().dot(x[e] * ze.real()) + ze.imag().dot(x[e] * ze.imag()));
    off += s;
  }
  return acc;
}

inline std::vector<Matrix> imag_parts(const std::vector<CMatrix>& v) {
  std::vector<Matrix> out;
  for (const auto& m : v) out.push_back(m.imag());
  return out;
}
}  // namespace detail

/// Mean dissipated power of complex fields.
inline DissipationReport dissipation_rate(const ComplexSolution& s, const MaterialField& mat,
                                          const Mesh& mesh) {
  const double w = mat.omega;
  DissipationReport r;
  const auto cim = detail::imag_parts(mat.cell);
  const auto nim = detail::imag_parts(mat.node);
  switch (s.physics) {
    case Physics::elastic:
      r.stiffness_part = 0.5 * w * detail::weighted_form(s.aux, cim, mesh.cell_volume);
      r.inertial_part = -0.5 * w * w * w * detail::weighted_form(s.potential, nim, mesh.node_volume);
      break;
    case Physics::acoustic:
      r.stiffness_part = -0.5 * w * detail::weighted_form(s.potential, nim, mesh.node_volume);
      r.inertial_part = 0.5 * w * detail::weighted_form(s.aux, cim, mesh.cell_volume);
      break;
    case Physics::electromagnetic:
      r.stiffness_part = 0.5 * w * detail::weighted_form(s.potential, nim, mesh.node_volume);
      r.inertial_part = -0.5 * w * detail::weighted_form(s.aux, cim, mesh.cell_volume);
      break;
  }
  r.mean_power = r.stiffness_part + r.inertial_part;
  return r;
}

/// Mean power supplied through the boundary and by the source.
inline double boundary_working_rate(const ComplexSolution& s, const Discretization& d,
                                    const CVector& force, double omega) {
  const CVector ub = d.boundary_map().transpose().cast<Complex>() * s.potential;
  const Complex bt = ub.dot(s.trace);  // sum conj(u) t
  switch (s.physics) {
    case Physics::elastic: {
      Complex src = 0.0;
      for (Eigen::Index i = 0; i < force.size(); ++i)
        src += d.node_weight()(i) * std::conj(s.potential(i)) * force(i);
      return 0.5 * omega * (bt.imag() + src.imag());
    }
    case Physics::acoustic: {
      Complex src = 0.0;
      for (Eigen::Index i = 0; i < force.size(); ++i)
        src += d.cell_weight()(i) * s.flux(i) * std::conj(force(i));
      return 0.5 * (-bt.real() + src.real());
    }
    case Physics::electromagnetic: {
      Complex src = 0.0;
      for (Eigen::Index i = 0; i < force.size(); ++i)
        src += d.node_weight()(i) * force(i) * std::conj(s.potential(i));
      return -0.5 * bt.real() - 0.5 * src.real();
    }
  }
  return 0.0;
}

}  // namespace wavemin
