// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wavemin/core.hpp"
#include "wavemin/mesh.hpp"
#include "wavemin/moduli.hpp"

namespace wavemin {

namespace detail {

/// Assembles a sparse matrix from a grid of optional blocks.
struct BlockAssembler {
  std::vector<Eigen::Index> row_off, col_off;
  std::vector<Triplet> trips;

  BlockAssembler(const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
    row_off.push_back(0);
    for (auto r : rows) row_off.push_back(row_off.back() + r);
    col_off.push_back(0);
    for (auto c : cols) col_off.push_back(col_off.back() + c);
  }

  void add(int bi, int bj, const SparseMatrix& m, double scale = 1.0) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it)
        trips.emplace_back(row_off[bi] + it.row(), col_off[bj] + it.col(), scale * it.value());
  }

  SparseMatrix build() const {
    SparseMatrix out(row_off.back(), col_off.back());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  }
};

inline SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix m(n, n);
  m.setIdentity();
  return m;
}

inline SparseMatrix sparse_diag(const Vector& d) {
  SparseMatrix m(d.size(), d.size());
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d(i));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Block-diagonal sparse matrix from equally sized dense blocks.
inline SparseMatrix sparse_block_diag(const std::vector<Matrix>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  std::vector<Triplet> t;
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        if (b(i, j) != 0.0) t.emplace_back(off + i, off + j, b(i, j));
    off += b.rows();
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace detail

// Discrete operators -----------------------------------------------------------

/// Nodal potentials (u, P, E) with nphi components, cellwise fluxes (strain or
/// stress in Mandel form, velocity, magnetic field) with nq components, and
/// integrated normal fluxes at boundary nodes with nphi components.
///
/// The divergence is defined from the gradient so that summation by parts is
/// exact: sum_c |c| q.grad(phi) + sum_n w_n phi.div(q, t) = sum_b phi_b t_b.
class Discretization {
 public:
  Discretization(std::shared_ptr<const Mesh> mesh, Physics physics)
      : mesh_(std::move(mesh)), physics_(physics) {
    if (!mesh_) throw ValidationError("discretization: null mesh");
    const int dim = mesh_->dim;
    if (physics == Physics::electromagnetic && dim != 1)
      throw ValidationError("electromagnetic problems are restricted to 1D layered slabs");
    switch (physics) {
      case Physics::elastic:
        nphi_ = dim;
        nq_ = static_cast<int>(mandel_size(dim));
        break;
      case Physics::acoustic:
        nphi_ = 1;
        nq_ = dim;
        break;
      case Physics::electromagnetic:
        nphi_ = 1;
        nq_ = 1;
        break;
    }
    assemble();
  }

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  Physics physics() const { return physics_; }
  int nphi() const { return nphi_; }
  int nq() const { return nq_; }
  Eigen::Index num_phi() const { return mesh_->num_nodes() * nphi_; }
  Eigen::Index num_q() const { return mesh_->num_cells() * nq_; }
  Eigen::Index num_trace() const { return mesh_->num_boundary() * nphi_; }

  /// Nodal dofs -> cellwise fluxes (strain in Mandel form for elastic).
  const SparseMatrix& grad() const { return grad_; }
  const Vector& cell_weight() const { return wc_; }
  const Vector& node_weight() const { return wn_; }
  /// Boundary trace dofs -> nodal dofs.
  const SparseMatrix& boundary_map() const { return bmap_; }

  /// div(q, t) = Wn^-1 (B t - G^T Wc q).
  Vector div(const Vector& q, const Vector& t) const {
    return ((bmap_ * t) - grad_.transpose() * wc_.cwiseProduct(q)).cwiseQuotient(wn_);
  }
  /// Sparse parts of div with respect to q and to t.
  SparseMatrix div_q() const {
    return -(detail::sparse_diag(wn_.cwiseInverse()) * grad_.transpose() *
             detail::sparse_diag(wc_));
  }
  SparseMatrix div_t() const { return detail::sparse_diag(wn_.cwiseInverse()) * bmap_; }

  /// Integrated boundary flux balancing a nodal residual: B^T (Wn r + G^T Wc q).
  Vector boundary_flux(const Vector& nodal, const Vector& q) const {
    return bmap_.transpose() * (wn_.cwiseProduct(nodal) + grad_.transpose() * wc_.cwiseProduct(q));
  }

  Eigen::Index node_dof(Eigen::Index n, int k) const { return n * nphi_ + k; }
  Eigen::Index cell_dof(Eigen::Index c, int k) const { return c * nq_ + k; }
  Eigen::Index trace_dof(Eigen::Index b, int k) const { return b * nphi_ + k; }

 private:
  void assemble() {
    const Mesh& m = *mesh_;
    std::vector<Triplet> t;
    for (Eigen::Index c = 0; c < m.num_cells(); ++c) {
      const auto& v = m.cells[c];
      if (m.dim == 1) {
        const double h = m.cell_volume(c);
        for (int k = 0; k < nphi_; ++k) {
          t.emplace_back(cell_dof(c, 0), node_dof(v[0], k), -1.0 / h);
          t.emplace_back(cell_dof(c, 0), node_dof(v[1], k), 1.0 / h);
        }
        continue;
      }
      const double area2 = 2.0 * m.cell_volume(c);
      double bx[3], by[3];
      for (int i = 0; i < 3; ++i) {
        const int j = v[(i + 1) % 3], k = v[(i + 2) % 3];
        bx[i] = (m.nodes(j, 1) - m.nodes(k, 1)) / area2;
        by[i] = (m.nodes(k, 0) - m.nodes(j, 0)) / area2;
      }
      for (int i = 0; i < 3; ++i) {
        if (physics_ == Physics::elastic) {
          const double s = 1.0 / std::sqrt(2.0);
          t.emplace_back(cell_dof(c, 0), node_dof(v[i], 0), bx[i]);
          t.emplace_back(cell_dof(c, 1), node_dof(v[i], 1), by[i]);
          t.emplace_back(cell_dof(c, 2), node_dof(v[i], 0), s * by[i]);
          t.emplace_back(cell_dof(c, 2), node_dof(v[i], 1), s * bx[i]);
        } else {
          t.emplace_back(cell_dof(c, 0), node_dof(v[i], 0), bx[i]);
          t.emplace_back(cell_dof(c, 1), node_dof(v[i], 0), by[i]);
        }
      }
    }
    grad_.resize(num_q(), num_phi());
    grad_.setFromTriplets(t.begin(), t.end());

    wc_.resize(num_q());
    for (Eigen::Index c = 0; c < m.num_cells(); ++c)
      for (int k = 0; k < nq_; ++k) wc_(cell_dof(c, k)) = m.cell_volume(c);
    wn_.resize(num_phi());
    for (Eigen::Index n = 0; n < m.num_nodes(); ++n)
      for (int k = 0; k < nphi_; ++k) wn_(node_dof(n, k)) = m.node_volume(n);

    std::vector<Triplet> bt;
    for (Eigen::Index b = 0; b < m.num_boundary(); ++b)
      for (int k = 0; k < nphi_; ++k) bt.emplace_back(node_dof(m.boundary_nodes[b], k), trace_dof(b, k), 1.0);
    bmap_.resize(num_phi(), num_trace());
    bmap_.setFromTriplets(bt.begin(), bt.end());
  }

  std::shared_ptr<const Mesh> mesh_;
  Physics physics_;
  int nphi_ = 1;
  int nq_ = 1;
  SparseMatrix grad_;
  Vector wc_, wn_;
  SparseMatrix bmap_;
};

// Field layout -------------------------------------------------------------------

/// Flat storage of F and G: four components followed by the boundary flux trace.
///
/// Block one pairs components 0 and 1, block two pairs 2 and 3. Elastic block
/// one lives on cells and block two on nodes; acoustic and electromagnetic
/// block one lives on nodes and block two on cells. Trace entries carry zero
/// quadrature weight.
struct FieldLayout {
  Physics physics = Physics::elastic;
  bool block1_on_cells = true;
  Eigen::Index n1 = 0, s1 = 0, n2 = 0, s2 = 0, ntrace = 0;

  explicit FieldLayout(const Discretization& d) : physics(d.physics()) {
    const Mesh& m = d.mesh();
    ntrace = d.num_trace();
    if (physics == Physics::elastic) {
      block1_on_cells = true;
      n1 = m.num_cells();
      s1 = d.nq();
      n2 = m.num_nodes();
      s2 = d.nphi();
    } else {
      block1_on_cells = false;
      n1 = m.num_nodes();
      s1 = d.nphi();
      n2 = m.num_cells();
      s2 = d.nq();
    }
  }
  FieldLayout() = default;

  Eigen::Index comp_size(int k) const { return k < 2 ? n1 * s1 : (k < 4 ? n2 * s2 : ntrace); }
  Eigen::Index offset(int k) const {
    Eigen::Index o = 0;
    for (int j = 0; j < k; ++j) o += comp_size(j);
    return o;
  }
  Eigen::Index size() const { return offset(5); }
  /// Size without the trace.
  Eigen::Index volume_size() const { return offset(4); }

  auto comp(Vector& v, int k) const { return v.segment(offset(k), comp_size(k)); }
  auto comp(const Vector& v, int k) const { return v.segment(offset(k), comp_size(k)); }

  /// Quadrature weights: entity volume for volume components, zero for the trace.
  Vector weights(const Mesh& m) const {
    Vector w = Vector::Zero(size());
    const Vector& v1 = block1_on_cells ? m.cell_volume : m.node_volume;
    const Vector& v2 = block1_on_cells ? m.node_volume : m.cell_volume;
    for (int k = 0; k < 2; ++k)
      for (Eigen::Index e = 0; e < n1; ++e) w.segment(offset(k) + e * s1, s1).setConstant(v1(e));
    for (int k = 2; k < 4; ++k)
      for (Eigen::Index e = 0; e < n2; ++e) w.segment(offset(k) + e * s2, s2).setConstant(v2(e));
    return w;
  }

  static const char* component_name(Physics p, int k, bool dual) {
    static const char* names[3][2][5] = {
        {{"e'", "sigma'", "omega u'", "p''", "t'"}, {"sigma''", "-e''", "p'", "omega u''", "t''"}},
        {{"-omega P'", "h''", "omega p''", "omega v''", "t''"}, {"h'", "-omega P''", "-omega v'", "omega p'", "t'"}},
        {{"E'", "D'", "B''", "H''", "t''"}, {"D''", "-E''", "H'", "-B'", "t'"}}};
    return names[static_cast<int>(p)][dual ? 1 : 0][k];
  }
};

/// Real field quadruple F with its layout.
struct FieldState {
  FieldLayout layout;
  Vector values;
};

/// Dual quadruple G = L F.
struct DualState {
  FieldLayout layout;
  Vector values;
};

// Material fields -------------------------------------------------------------------

/// Expands scalar tensors to the shapes required by the mesh dimension.
inline ComplexModuli expand_moduli(ComplexModuli m, int dim) {
  auto expand = [dim](CMatrix& x, Eigen::Index want) {
    if (x.rows() == 1 && x.cols() == 1 && want > 1)
      x = CMatrix::Identity(want, want) * x(0, 0);
  };
  if (m.physics == Physics::elastic) expand(m.dual, dim);
  if (m.physics == Physics::acoustic) expand(m.dual, dim);
  return m;
}

/// Complex moduli per entity: cells carry C, r or m, nodes carry rho, k or eps.
/// Nodal values are dual-volume weighted averages of the adjacent cells.
struct MaterialField {
  Physics physics = Physics::elastic;
  double omega = 1.0;
  std::vector<CMatrix> cell;
  std::vector<CMatrix> node;

  const std::vector<CMatrix>& primal() const { return physics == Physics::elastic ? cell : node; }
  const std::vector<CMatrix>& dual() const { return physics == Physics::elastic ? node : cell; }

  static MaterialField build(const Mesh& mesh, Physics physics, double omega,
                             const std::vector<ComplexModuli>& regions) {
    MaterialField f;
    f.physics = physics;
    f.omega = omega;
    std::vector<ComplexModuli> reg;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (regions[i].physics != physics)
        throw ValidationError("region " + std::to_string(i) + ": physics does not match problem");
      if (std::abs(regions[i].omega - omega) > 1e-14 * omega)
        throw ValidationError("region " + std::to_string(i) + ": frequency differs from problem");
      reg.push_back(expand_moduli(regions[i], mesh.dim));
      try {
        validate_moduli(reg.back());
      } catch (const ValidationError& e) {
        throw ValidationError("region " + std::to_string(i) + ": " + e.what());
      }
      if (physics == Physics::elastic && reg.back().dual.rows() != mesh.dim)
        throw ValidationError("region " + std::to_string(i) + ": density size must equal dimension");
      if (physics == Physics::acoustic && reg.back().dual.rows() != mesh.dim)
        throw ValidationError("region " + std::to_string(i) +
                              ": inverse density size must equal dimension");
      if (physics == Physics::electromagnetic && reg.back().primal.rows() != 1)
        throw ValidationError("region " + std::to_string(i) + ": layered EM moduli are scalars");
    }
    const bool elastic = physics == Physics::elastic;
    for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
      const int r = mesh.cell_region[c];
      if (r < 0 || r >= static_cast<int>(reg.size()))
        throw ValidationError("cell " + std::to_string(c) + " references undefined region " +
                              std::to_string(r));
      f.cell.push_back(elastic ? reg[r].primal : reg[r].dual);
    }
    const double nv = mesh.vertices_per_cell();
    for (Eigen::Index n = 0; n < mesh.num_nodes(); ++n) {
      CMatrix acc;
      for (int c : mesh.node_cells[n]) {
        const CMatrix& x = elastic ? reg[mesh.cell_region[c]].dual : reg[mesh.cell_region[c]].primal;
        const double w = mesh.cell_volume(c) / nv;
        if (acc.size() == 0) acc = CMatrix::Zero(x.rows(), x.cols());
        acc += w * x;
      }
      f.node.push_back(acc / mesh.node_volume(n));
    }
    return f;
  }

  /// True when every dual tensor has zero imaginary part.
  bool dual_lossless() const {
    for (const auto& x : dual())
      if (detail::max_abs(x.imag()) > 1e-15 * std::max(detail::max_abs(x.real()), 1e-300)) return false;
    return true;
  }
};

/// Sparse L over the flat layout. With `drop_dual` the second block is zero
/// (lossless dual modulus).
inline SparseMatrix assemble_operator(const FieldLayout& lay, const MaterialField& mat,
                                      bool drop_dual = false) {
  std::vector<Triplet> t;
  auto put = [&](const CGBlock& blk, Eigen::Index o_a, Eigen::Index o_b) {
    const auto s = blk.size();
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j) {
        t.emplace_back(o_a + i, o_a + j, blk.a(i, j));
        t.emplace_back(o_a + i, o_b + j, blk.b(i, j));
        t.emplace_back(o_b + j, o_a + i, blk.b(i, j));
        t.emplace_back(o_b + i, o_b + j, blk.d(i, j));
      }
  };
  const Physics p = lay.physics;
  const auto& prim = mat.primal();
  const auto& dual = mat.dual();
  const char* where = lay.block1_on_cells ? "cell " : "node ";
  const char* where2 = lay.block1_on_cells ? "node " : "cell ";
  for (Eigen::Index e = 0; e < lay.n1; ++e) {
    const std::string name = std::string(primal_name(p)) + " at " + where + std::to_string(e);
    put(tensor_block(prim[e], primal_sign(p), name), lay.offset(0) + e * lay.s1,
        lay.offset(1) + e * lay.s1);
  }
  if (!drop_dual) {
    for (Eigen::Index e = 0; e < lay.n2; ++e) {
      const std::string name = std::string(dual_name(p)) + " at " + where2 + std::to_string(e);
      put(tensor_block(dual[e], dual_sign(p), name), lay.offset(2) + e * lay.s2,
          lay.offset(3) + e * lay.s2);
    }
  }
  SparseMatrix L(lay.size(), lay.size());
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

/// Dense per-entity blocks of a sparse layout operator (block one entities first).
inline std::vector<Matrix> entity_blocks(const FieldLayout& lay, const SparseMatrix& L) {
  std::vector<Matrix> out;
  const Matrix dummy;
  auto extract = [&](Eigen::Index oa, Eigen::Index ob, Eigen::Index s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < s; ++i) idx.push_back(oa + i);
    for (Eigen::Index i = 0; i < s; ++i) idx.push_back(ob + i);
    Matrix m(2 * s, 2 * s);
    for (Eigen::Index i = 0; i < 2 * s; ++i)
      for (Eigen::Index j = 0; j < 2 * s; ++j) m(i, j) = L.coeff(idx[i], idx[j]);
    out.push_back(m);
  };
  for (Eigen::Index e = 0; e < lay.n1; ++e)
    extract(lay.offset(0) + e * lay.s1, lay.offset(1) + e * lay.s1, lay.s1);
  for (Eigen::Index e = 0; e < lay.n2; ++e)
    extract(lay.offset(2) + e * lay.s2, lay.offset(3) + e * lay.s2, lay.s2);
  return out;
}

/// Indices into the flat layout of entity k as returned by entity_blocks.
inline std::vector<Eigen::Index> entity_indices(const FieldLayout& lay, Eigen::Index k) {
  std::vector<Eigen::Index> idx;
  Eigen::Index oa, ob, s;
  if (k < lay.n1) {
    oa = lay.offset(0) + k * lay.s1;
    ob = lay.offset(1) + k * lay.s1;
    s = lay.s1;
  } else {
    const auto e = k - lay.n1;
    oa = lay.offset(2) + e * lay.s2;
    ob = lay.offset(3) + e * lay.s2;
    s = lay.s2;
  }
  for (Eigen::Index i = 0; i < s; ++i) idx.push_back(oa + i);
  for (Eigen::Index i = 0; i < s; ++i) idx.push_back(ob + i);
  return idx;
}

/// G = L F.
inline DualState apply_constitutive(const FieldState& F, const SparseMatrix& L) {
  if (F.values.size() != L.cols()) throw ValidationError("apply_constitutive: dimension mismatch");
  return {F.layout, L * F.values};
}

/// Pointwise form for a single entity: (a, b) -> block * (a, b).
inline Vector apply_constitutive(const Vector& f, const OperatorL& L) {
  if (f.size() != L.size()) throw ValidationError("apply_constitutive: dimension mismatch");
  return L.apply(f);
}

// Boundary conditions -------------------------------------------------------------------

/// First pair: prescribe the real potential (u', P', E') or target the dual flux.
enum class PotentialChoice { prescribe_potential, target_flux };
/// Second pair: prescribe the real flux trace or target the dual potential.
enum class FluxChoice { prescribe_flux, target_potential };

/// Selections for one boundary dof. Flux values are integrated over the
/// boundary patch of the node.
struct BoundaryDof {
  PotentialChoice first = PotentialChoice::prescribe_potential;
  double first_value = 0.0;
  FluxChoice second = FluxChoice::target_potential;
  double second_value = 0.0;
};

struct BoundarySpec {
  std::vector<BoundaryDof> dofs;  // index b * nphi + k
};

/// Side-level condition. Dirichlet and Neumann take complex values per
/// component (Neumann as a flux density); `selection` sets the two real
/// pairs directly.
struct SideCondition {
  enum class Kind { dirichlet, neumann, selection };
  std::string side;
  Kind kind = Kind::dirichlet;
  CVector value;                           // dirichlet / neumann, size nphi
  std::vector<BoundaryDof> selections;     // selection, size nphi, flux values as densities
};

/// Converts side conditions to per-dof selections. Dirichlet wins at corners.
inline BoundarySpec make_boundary_spec(const Discretization& d,
                                       const std::vector<SideCondition>& conds) {
  const Mesh& m = d.mesh();
  const int nphi = d.nphi();
  const bool elastic = d.physics() == Physics::elastic;
  for (const auto& c : conds) {
    if (c.kind == SideCondition::Kind::selection) {
      if (static_cast<int>(c.selections.size()) != nphi)
        throw ValidationError("boundary side '" + c.side + "': one selection per component required");
    } else if (c.value.size() != nphi) {
      throw ValidationError("boundary side '" + c.side + "': expected " + std::to_string(nphi) +
                            " complex values");
    }
    if (m.side_nodes(c.side).empty())
      throw ValidationError("boundary side '" + c.side + "' does not exist on the mesh");
  }
  BoundarySpec spec;
  spec.dofs.resize(static_cast<std::size_t>(d.num_trace()));
  for (std::size_t b = 0; b < m.boundary_nodes.size(); ++b) {
    std::vector<const SideCondition*> here;
    for (const auto& c : conds)
      for (const auto& s : m.boundary_sides[b])
        if (s == c.side) here.push_back(&c);
    if (here.empty())
      throw ValidationError("boundary node " + std::to_string(m.boundary_nodes[b]) +
                            " has no boundary condition");
    const SideCondition* dir = nullptr;
    for (auto* c : here)
      if (c->kind == SideCondition::Kind::dirichlet && !dir) dir = c;
    for (int k = 0; k < nphi; ++k) {
      BoundaryDof& dof = spec.dofs[b * nphi + k];
      if (dir) {
        dof.first = PotentialChoice::prescribe_potential;
        dof.first_value = dir->value(k).real();
        dof.second = FluxChoice::target_potential;
        dof.second_value = dir->value(k).imag();
        continue;
      }
      const SideCondition* sel = nullptr;
      for (auto* c : here)
        if (c->kind == SideCondition::Kind::selection && !sel) sel = c;
      if (sel) {
        dof = sel->selections[k];
        const double w = m.side_weight(b, sel->side);
        if (dof.first == PotentialChoice::target_flux) dof.first_value *= w;
        if (dof.second == FluxChoice::prescribe_flux) dof.second_value *= w;
        continue;
      }
      // Neumann on every side through this node: integrated flux adds up.
      Complex t = 0.0;
      for (auto* c : here) t += c->value(k) * m.side_weight(b, c->side);
      dof.first = PotentialChoice::target_flux;
      dof.second = FluxChoice::prescribe_flux;
      dof.first_value = elastic ? t.imag() : t.real();
      dof.second_value = elastic ? t.real() : t.imag();
    }
  }
  return spec;
}

// Sources -------------------------------------------------------------------------

/// Body force f (elastic, nodal), source f (acoustic, cellwise vector) or
/// current j (EM, nodal), admissible dual data G0 and boundary selections.
struct SourceData {
  CVector force;
  Vector g0;
  BoundarySpec bc;
};

inline Eigen::Index force_size(const Discretization& d) {
  return d.physics() == Physics::acoustic ? d.num_q() : d.num_phi();
}

// Primary unknowns and trial completion ------------------------------------------------

/// Primary unknowns: potential x (u', P', E') at nodes, flux y (sigma', v'', H'')
/// at cells and boundary trace t (t', t'', t'').
struct Primary {
  Vector x, y, t;

  Vector stacked() const {
    Vector s(x.size() + y.size() + t.size());
    s << x, y, t;
    return s;
  }
};

/// Affine completion F = A (x, y, t) + c of the primary unknowns.
struct TrialMap {
  SparseMatrix A;
  Vector c;
};

inline TrialMap build_trial_map(const Discretization& d, const FieldLayout& lay,
                                const CVector& force, double omega) {
  if (!(omega > 0.0)) throw ValidationError("frequency omega must be positive");
  if (force.size() != force_size(d)) throw ValidationError("source has wrong size");
  const auto nx = d.num_phi(), ny = d.num_q(), nt = d.num_trace();
  detail::BlockAssembler asmb({lay.comp_size(0), lay.comp_size(1), lay.comp_size(2),
                               lay.comp_size(3), lay.comp_size(4)},
                              {nx, ny, nt});
  const SparseMatrix Ix = detail::sparse_identity(nx), Iy = detail::sparse_identity(ny),
                     It = detail::sparse_identity(nt);
  const SparseMatrix dq = d.div_q(), dt = d.div_t();
  Vector c = Vector::Zero(lay.size());
  switch (d.physics()) {
    case Physics::elastic:
      asmb.add(0, 0, d.grad());
      asmb.add(1, 1, Iy);
      asmb.add(2, 0, Ix, omega);
      asmb.add(3, 1, dq, -1.0 / omega);
      asmb.add(3, 2, dt, -1.0 / omega);
      lay.comp(c, 3) = -force.real() / omega;
      break;
    case Physics::acoustic:
      asmb.add(0, 0, Ix, -omega);
      asmb.add(1, 1, dq);
      asmb.add(1, 2, dt);
      asmb.add(2, 0, d.grad());
      asmb.add(3, 1, Iy, omega);
      lay.comp(c, 2) = -force.real();
      break;
    case Physics::electromagnetic:
      asmb.add(0, 0, Ix);
      asmb.add(1, 1, dq, 1.0 / omega);
      asmb.add(1, 2, dt, 1.0 / omega);
      asmb.add(2, 0, d.grad(), -1.0 / omega);
      asmb.add(3, 1, Iy);
      lay.comp(c, 1) = force.imag() / omega;
      break;
  }
  asmb.add(4, 2, It);
  return {asmb.build(), c};
}

/// Fills the dependent components from the primary unknowns.
inline FieldState complete_trial_field(const Primary& p, const Discretization& d,
                                       const CVector& force, double omega) {
  FieldLayout lay(d);
  if (p.x.size() != d.num_phi() || p.y.size() != d.num_q() || p.t.size() != d.num_trace())
    throw ValidationError("complete_trial_field: unknown layout mismatch");
  const TrialMap tm = build_trial_map(d, lay, force, omega);
  return {lay, tm.A * p.stacked() + tm.c};
}

/// Recovers the primary unknowns from a completed field.
inline Primary primary_from_field(const FieldState& F, double omega) {
  const FieldLayout& lay = F.layout;
  Primary p;
  p.t = lay.comp(F.values, 4);
  switch (lay.physics) {
    case Physics::elastic:
      p.x = lay.comp(F.values, 2) / omega;
      p.y = lay.comp(F.values, 1);
      break;
    case Physics::acoustic:
      p.x = -lay.comp(F.values, 0) / omega;
      p.y = lay.comp(F.values, 3) / omega;
      break;
    case Physics::electromagnetic:
      p.x = lay.comp(F.values, 0);
      p.y = lay.comp(F.values, 3);
      break;
  }
  return p;
}

// Boundary quantities -----------------------------------------------------------------

/// Real potential of F at nodes: u', P' or E'.
inline Vector potential_of_field(const FieldState& F, double omega) {
  return primary_from_field(F, omega).x;
}

/// Dual potential of G at nodes: u'', P'' or E''.
inline Vector potential_of_dual(const Vector& G, const FieldLayout& lay, double omega) {
  switch (lay.physics) {
    case Physics::elastic: return lay.comp(G, 3) / omega;
    case Physics::acoustic: return -lay.comp(G, 1) / omega;
    case Physics::electromagnetic: return -lay.comp(G, 1);
  }
  return {};
}

/// Nodal residual and cell flux whose boundary balance gives the dual flux
/// trace (t'' elastic, t' acoustic and EM); interior entries vanish when G
/// satisfies the dual constraint.
inline std::pair<Vector, Vector> dual_flux_parts(const Vector& G, const FieldLayout& lay,
                                                 const CVector& force, double omega) {
  switch (lay.physics) {
    case Physics::elastic:
      return {omega * lay.comp(G, 2) - force.imag(), lay.comp(G, 0)};
    case Physics::acoustic:
      return {lay.comp(G, 0), -lay.comp(G, 2) / omega};
    case Physics::electromagnetic:
      return {-omega * lay.comp(G, 0) - force.real(), lay.comp(G, 2)};
  }
  return {};
}

inline Vector flux_of_dual(const Vector& G, const FieldLayout& lay, const Discretization& d,
                           const CVector& force, double omega) {
  auto [nodal, q] = dual_flux_parts(G, lay, force, omega);
  return d.boundary_flux(nodal, q);
}

/// Max-norm violation of the dual-side differential constraints by G.
inline double dual_constraint_residual(const Vector& G, const FieldLayout& lay,
                                       const Discretization& d, const CVector& force,
                                       double omega) {
  auto [nodal, q] = dual_flux_parts(G, lay, force, omega);
  const Vector bal = d.node_weight().cwiseProduct(nodal) +
                     d.grad().transpose() * d.cell_weight().cwiseProduct(q) -
                     d.boundary_map() * lay.comp(G, 4);
  double r = bal.size() ? bal.cwiseAbs().maxCoeff() : 0.0;
  const Vector phi = potential_of_dual(G, lay, omega);
  Vector grad_rel;
  switch (lay.physics) {
    case Physics::elastic: grad_rel = lay.comp(G, 1) + d.grad() * phi; break;
    case Physics::acoustic:
      grad_rel = lay.comp(G, 3) - (-(d.grad() * phi) + force.imag());
      break;
    case Physics::electromagnetic: grad_rel = lay.comp(G, 3) + d.grad() * phi / omega; break;
  }
  if (grad_rel.size()) r = std::max(r, grad_rel.cwiseAbs().maxCoeff());
  return r;
}

/// Canonical admissible G0 built from the boundary targets: the dual flux
/// field is zero, the dual potential equals its boundary targets at boundary
/// nodes and zero inside.
inline SourceData build_source_data(const Discretization& d, const CVector& force,
                                    const BoundarySpec& bc, double omega) {
  if (!(omega > 0.0)) throw ValidationError("frequency omega must be positive");
  if (force.size() != force_size(d)) throw ValidationError("source has wrong size");
  if (static_cast<Eigen::Index>(bc.dofs.size()) != d.num_trace())
    throw ValidationError("boundary spec does not match the mesh boundary");
  FieldLayout lay(d);
  Vector t0 = Vector::Zero(d.num_trace());
  Vector phi0_b = Vector::Zero(d.num_trace());
  for (std::size_t i = 0; i < bc.dofs.size(); ++i) {
    if (bc.dofs[i].first == PotentialChoice::target_flux) t0(i) = bc.dofs[i].first_value;
    if (bc.dofs[i].second == FluxChoice::target_potential) phi0_b(i) = bc.dofs[i].second_value;
  }
  const Vector phi0 = d.boundary_map() * phi0_b;
  const Vector zero_q = Vector::Zero(d.num_q());
  const Vector div0 = d.div(zero_q, t0);
  Vector g = Vector::Zero(lay.size());
  switch (d.physics()) {
    case Physics::elastic:
      lay.comp(g, 1) = -(d.grad() * phi0);
      lay.comp(g, 2) = (div0 + force.imag()) / omega;
      lay.comp(g, 3) = omega * phi0;
      break;
    case Physics::acoustic:
      lay.comp(g, 0) = div0;
      lay.comp(g, 1) = -omega * phi0;
      lay.comp(g, 3) = -(d.grad() * phi0) + force.imag();
      break;
    case Physics::electromagnetic:
      lay.comp(g, 0) = -(div0 + force.real()) / omega;
      lay.comp(g, 1) = -phi0;
      lay.comp(g, 3) = -(d.grad() * phi0) / omega;
      break;
  }
  lay.comp(g, 4) = t0;
  SourceData src{force, g, bc};
  const double res = dual_constraint_residual(g, lay, d, force, omega);
  const double scale = std::max({1.0, g.cwiseAbs().maxCoeff(), force.cwiseAbs().maxCoeff()});
  if (res > 1e-10 * scale)
    throw ValidationError("build_source_data: no admissible extension of the boundary data");
  return src;
}

/// Validates a user supplied G0 against the dual constraints.
inline SourceData make_source_data(const Discretization& d, const CVector& force,
                                   const BoundarySpec& bc, const Vector& g0, double omega) {
  FieldLayout lay(d);
  if (g0.size() != lay.size()) throw ValidationError("G0 has wrong size");
  const double res = dual_constraint_residual(g0, lay, d, force, omega);
  const double scale = std::max({1.0, g0.cwiseAbs().maxCoeff(), force.cwiseAbs().maxCoeff()});
  if (res > 1e-10 * scale) throw ValidationError("G0 violates the dual-side constraints");
  const Vector t0 = lay.comp(g0, 4);
  const Vector phi0 = d.boundary_map().transpose() * potential_of_dual(g0, lay, omega);
  for (std::size_t i = 0; i < bc.dofs.size(); ++i) {
    const auto& dof = bc.dofs[i];
    const double tol = 1e-10 * scale;
    if (dof.first == PotentialChoice::target_flux && std::abs(t0(i) - dof.first_value) > tol)
      throw ValidationError("G0 flux trace disagrees with boundary target");
    if (dof.second == FluxChoice::target_potential && std::abs(phi0(i) - dof.second_value) > tol)
      throw ValidationError("G0 potential disagrees with boundary target");
  }
  return {force, g0, bc};
}

struct BoundaryResidualEntry {
  int node = 0;
  int component = 0;
  bool flux = false;  // true: dual flux minus target, false: target minus dual potential
  double value = 0.0;
};

/// Mismatch of the natural boundary conditions: dual flux against its target
/// where the real potential is free, dual potential against its target where
/// the real flux is free.
inline std::vector<BoundaryResidualEntry> boundary_residual(const FieldState& F,
                                                            const DualState& G,
                                                            const Discretization& d,
                                                            const SourceData& src,
                                                            double omega) {
  const FieldLayout& lay = F.layout;
  const Vector tg = flux_of_dual(G.values, lay, d, src.force, omega);
  const Vector pg = d.boundary_map().transpose() * potential_of_dual(G.values, lay, omega);
  std::vector<BoundaryResidualEntry> out;
  const int nphi = d.nphi();
  for (std::size_t i = 0; i < src.bc.dofs.size(); ++i) {
    const auto& dof = src.bc.dofs[i];
    const int node = d.mesh().boundary_nodes[i / nphi];
    const int k = static_cast<int>(i % nphi);
    if (dof.first == PotentialChoice::target_flux)
      out.push_back({node, k, true, tg(i) - dof.first_value});
    if (dof.second == FluxChoice::target_potential)
      out.push_back({node, k, false, dof.second_value - pg(i)});
  }
  return out;
}

// Complex fields ------------------------------------------------------------------

/// Complex nodal potential, cellwise flux and auxiliary cell field, plus the
/// integrated boundary flux. Flux: sigma, v or H. Auxiliary: strain e,
/// momentum p or induction B.
struct ComplexSolution {
  Physics physics = Physics::elastic;
  CVector potential;
  CVector flux;
  CVector aux;
  CVector trace;
};

/// Complex fields of a completed pair (F, G = L F).
inline ComplexSolution complex_from_fields(const FieldState& F, const Vector& G,
                                           const Discretization& d, const CVector& force,
                                           double omega) {
  const FieldLayout& lay = F.layout;
  const Vector& f = F.values;
  const Complex I(0.0, 1.0);
  ComplexSolution s;
  s.physics = lay.physics;
  const Vector tg = flux_of_dual(G, lay, d, force, omega);
  const Vector pg = potential_of_dual(G, lay, omega);
  switch (lay.physics) {
    case Physics::elastic:
      s.potential = (lay.comp(f, 2) / omega).cast<Complex>() + I * pg.cast<Complex>();
      s.flux = lay.comp(f, 1).cast<Complex>() + I * lay.comp(G, 0).cast<Complex>();
      s.aux = lay.comp(f, 0).cast<Complex>() - I * lay.comp(G, 1).cast<Complex>();
      s.trace = lay.comp(f, 4).cast<Complex>() + I * tg.cast<Complex>();
      break;
    case Physics::acoustic:
      s.potential = (-lay.comp(f, 0) / omega).cast<Complex>() + I * pg.cast<Complex>();
      s.flux = (-lay.comp(G, 2) / omega).cast<Complex>() + I * (lay.comp(f, 3) / omega).cast<Complex>();
      s.aux = (lay.comp(G, 3) / omega).cast<Complex>() + I * (lay.comp(f, 2) / omega).cast<Complex>();
      s.trace = tg.cast<Complex>() + I * lay.comp(f, 4).cast<Complex>();
      break;
    case Physics::electromagnetic:
      s.potential = lay.comp(f, 0).cast<Complex>() + I * pg.cast<Complex>();
      s.flux = lay.comp(G, 2).cast<Complex>() + I * lay.comp(f, 3).cast<Complex>();
      s.aux = (-lay.comp(G, 3)).cast<Complex>() + I * lay.comp(f, 2).cast<Complex>();
      s.trace = tg.cast<Complex>() + I * lay.comp(f, 4).cast<Complex>();
      break;
  }
  return s;
}

/// Real primary unknowns carried by a complex solution.
inline Primary primary_from_complex(const ComplexSolution& s) {
  if (s.physics == Physics::elastic) return {s.potential.real(), s.flux.real(), s.trace.real()};
  return {s.potential.real(), s.flux.imag(), s.trace.imag()};
}

/// Real field F of a complex solution.
inline FieldState field_from_complex(const ComplexSolution& s, const Discretization& d,
                                     const CVector& force, double omega) {
  return complete_trial_field(primary_from_complex(s), d, force, omega);
}

}  // namespace wavemin
