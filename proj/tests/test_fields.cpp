// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace wavemin {
namespace {

using namespace wavemin::testing;

std::shared_ptr<const Mesh> unit_rod(int cells) {
  return std::make_shared<Mesh>(Mesh::uniform_interval(0.0, 1.0, cells));
}

// Boundary index of the node at x = 1 on a rod.
Eigen::Index right_end(const Mesh& m) { return m.nodes(m.boundary_nodes[0], 0) > 0.5 ? 0 : 1; }

TEST(Mesh, IntervalAndRectangle) {
  const Mesh rod = Mesh::uniform_interval(0.0, 2.0, 4);
  EXPECT_EQ(rod.num_nodes(), 5);
  EXPECT_EQ(rod.num_cells(), 4);
  EXPECT_NEAR(rod.cell_volume.sum(), 2.0, 1e-15);
  EXPECT_NEAR(rod.node_volume.sum(), 2.0, 1e-15);
  EXPECT_EQ(rod.num_boundary(), 2);

  const Mesh plate = Mesh::rectangle(0.0, 2.0, 0.0, 1.0, 3, 2);
  EXPECT_EQ(plate.num_nodes(), 12);
  EXPECT_EQ(plate.num_cells(), 12);
  EXPECT_NEAR(plate.cell_volume.sum(), 2.0, 1e-14);
  EXPECT_NEAR(plate.node_volume.sum(), 2.0, 1e-14);
  EXPECT_EQ(plate.num_boundary(), 10);
  EXPECT_NEAR(plate.boundary_weight.sum(), 6.0, 1e-14);
  EXPECT_EQ(plate.side_nodes("left").size(), 3u);
  EXPECT_EQ(plate.side_nodes("top").size(), 4u);
}

TEST(Mesh, RejectsDegenerateCells) {
  EXPECT_THROW(Mesh::interval({0.0, 0.5, 0.5, 1.0}), ValidationError);
  EXPECT_THROW(Mesh::interval({0.0}), ValidationError);
  EXPECT_THROW(Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 0, 2), ValidationError);
}

// sum Wn phi . div(q, t) = (B^T phi) . t - sum Wc q . G phi, exactly.
TEST(Discretization, SummationByPartsIsExact) {
  std::mt19937_64 rng(4);
  std::vector<std::shared_ptr<const Mesh>> meshes = {
      std::make_shared<Mesh>(Mesh::interval({0.0, 0.1, 0.35, 0.4, 1.0})),
      std::make_shared<Mesh>(Mesh::rectangle(0.0, 1.0, 0.0, 0.7, 4, 3))};
  for (const auto& mesh : meshes)
    for (Physics p : {Physics::elastic, Physics::acoustic}) {
      const Discretization d(mesh, p);
      for (int k = 0; k < 10; ++k) {
        const Vector phi = random_vector(rng, d.num_phi());
        const Vector q = random_vector(rng, d.num_q());
        const Vector t = random_vector(rng, d.num_trace());
        const double lhs = d.node_weight().dot(phi.cwiseProduct(d.div(q, t)));
        const double rhs = (d.boundary_map().transpose() * phi).dot(t) -
                           d.cell_weight().dot(q.cwiseProduct(d.grad() * phi));
        EXPECT_NEAR(lhs, rhs, 1e-13 * (phi.norm() * (q.norm() + t.norm()) + 1.0));
      }
    }
}

TEST(Discretization, GradientOfLinearFieldIsExact) {
  auto mesh = std::make_shared<Mesh>(Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 3, 3));
  const Discretization d(mesh, Physics::elastic);
  Vector u(d.num_phi());
  for (Eigen::Index n = 0; n < mesh->num_nodes(); ++n) {
    const double x = mesh->nodes(n, 0), y = mesh->nodes(n, 1);
    u(d.node_dof(n, 0)) = 2.0 * x + 3.0 * y;
    u(d.node_dof(n, 1)) = -x + 0.5 * y;
  }
  const Vector e = d.grad() * u;
  for (Eigen::Index c = 0; c < mesh->num_cells(); ++c) {
    EXPECT_NEAR(e(d.cell_dof(c, 0)), 2.0, 1e-13);
    EXPECT_NEAR(e(d.cell_dof(c, 1)), 0.5, 1e-13);
    EXPECT_NEAR(e(d.cell_dof(c, 2)), (3.0 - 1.0) / std::sqrt(2.0), 1e-13);
  }
}

TEST(CompleteTrialField, ElasticRodExamples) {
  const auto mesh = unit_rod(10);
  const Discretization d(mesh, Physics::elastic);
  const double w = 2.0;
  Primary p;
  p.x = Vector(d.num_phi());
  for (Eigen::Index n = 0; n < mesh->num_nodes(); ++n) p.x(n) = 3.0 * mesh->nodes(n, 0) + 1.0;
  p.y = Vector(d.num_q());
  for (Eigen::Index c = 0; c < mesh->num_cells(); ++c) p.y(c) = mesh->centroid(c)(0);
  p.t = Vector::Zero(2);
  p.t(right_end(*mesh)) = 1.0;  // outward flux sigma' n = x at both ends
  const FieldState F = complete_trial_field(p, d, CVector::Zero(d.num_phi()), w);
  const FieldLayout& lay = F.layout;
  EXPECT_LT((lay.comp(F.values, 0).array() - 3.0).abs().maxCoeff(), 1e-13);
  EXPECT_LT((lay.comp(F.values, 3).array() + 0.5).abs().maxCoeff(), 1e-13);
  const Primary back = primary_from_field(F, w);
  EXPECT_LT((back.stacked() - p.stacked()).norm(), 1e-14);
}

TEST(CompleteTrialField, AcousticConstantPressure) {
  const auto mesh = unit_rod(8);
  const Discretization d(mesh, Physics::acoustic);
  std::mt19937_64 rng(2);
  Primary p{Vector::Constant(d.num_phi(), 1.7), random_vector(rng, d.num_q()), random_vector(rng, 2)};
  const FieldState F = complete_trial_field(p, d, CVector::Zero(d.num_q()), 1.3);
  EXPECT_LT(F.layout.comp(F.values, 2).cwiseAbs().maxCoeff(), 1e-14);
}

// The dependent components satisfy the constraints they are built from.
TEST(CompleteTrialField, ConstraintsHoldByConstruction) {
  std::mt19937_64 rng(8);
  const Complex I(0, 1);
  auto mesh = std::make_shared<Mesh>(Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 3, 2));
  const double w = 1.4;
  for (Physics ph : {Physics::elastic, Physics::acoustic}) {
    const Discretization d(mesh, ph);
    const Primary p{random_vector(rng, d.num_phi()), random_vector(rng, d.num_q()), random_vector(rng, d.num_trace())};
    const auto nf = force_size(d);
    const CVector f = random_vector(rng, nf).cast<Complex>() + I * random_vector(rng, nf).cast<Complex>();
    const FieldState F = complete_trial_field(p, d, f, w);
    const FieldLayout& lay = F.layout;
    if (ph == Physics::elastic) {
      EXPECT_LT((lay.comp(F.values, 0) - d.grad() * p.x).norm(), 1e-13 * p.x.norm() * 10);
      const Vector res = w * lay.comp(F.values, 3) + d.div(p.y, p.t) + f.real();
      EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-11);
    } else {
      EXPECT_LT((lay.comp(F.values, 1) - d.div(p.y, p.t)).norm(), 1e-11);
      const Vector res = lay.comp(F.values, 2) - (d.grad() * p.x - f.real());
      EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-11);
    }
  }
}

TEST(CompleteTrialField, Errors) {
  const Discretization d(unit_rod(4), Physics::elastic);
  const Primary p{Vector::Zero(5), Vector::Zero(4), Vector::Zero(2)};
  EXPECT_THROW(complete_trial_field(p, d, CVector::Zero(5), 0.0), ValidationError);
  const Primary bad{Vector::Zero(4), Vector::Zero(4), Vector::Zero(2)};
  EXPECT_THROW(complete_trial_field(bad, d, CVector::Zero(5), 1.0), ValidationError);
}

TEST(ApplyConstitutive, Examples) {
  const auto mesh = unit_rod(3);
  const Discretization d(mesh, Physics::elastic);
  const FieldLayout lay(d);
  const MaterialField mat =
      MaterialField::build(*mesh, Physics::elastic, 1.0, {ComplexModuli::elastic(Complex(2, 1), Complex(1, -1), 1.0)});
  const SparseMatrix L = assemble_operator(lay, mat);
  EXPECT_EQ(apply_constitutive(FieldState{lay, Vector::Zero(lay.size())}, L).values.norm(), 0.0);

  const OperatorL single = assemble_L(ComplexModuli::elastic(Complex(2, 1), Complex(1, -1), 1.0));
  Vector f(4), g(4);
  f << 1, 0, 1, 0;
  g << 5, -2, 2, -1;
  EXPECT_LT((apply_constitutive(f, single) - g).norm(), 1e-14);
  EXPECT_THROW(apply_constitutive(Vector::Zero(3), single), ValidationError);
}

// Complex oracle: sigma = C e on cells and p = i w rho u on nodes.
TEST(ApplyConstitutive, MatchesComplexArithmetic) {
  std::mt19937_64 rng(12);
  const Complex I(0, 1);
  const double w = 2.5;
  auto mesh = std::make_shared<Mesh>(Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 2, 2));
  const ComplexModuli m = random_passive(rng, Physics::elastic, 2, w);
  const Discretization d(mesh, Physics::elastic);
  const FieldLayout lay(d);
  const MaterialField mat = MaterialField::build(*mesh, Physics::elastic, w, {m});
  const SparseMatrix L = assemble_operator(lay, mat);
  const CVector e = random_vector(rng, d.num_q()).cast<Complex>() + I * random_vector(rng, d.num_q()).cast<Complex>();
  const CVector u =
      random_vector(rng, d.num_phi()).cast<Complex>() + I * random_vector(rng, d.num_phi()).cast<Complex>();
  CVector sigma(e.size()), p(u.size());
  for (Eigen::Index c = 0; c < mesh->num_cells(); ++c) sigma.segment(3 * c, 3) = m.primal * e.segment(3 * c, 3);
  for (Eigen::Index n = 0; n < mesh->num_nodes(); ++n) p.segment(2 * n, 2) = I * w * (m.dual * u.segment(2 * n, 2));
  Vector F = Vector::Zero(lay.size()), G = Vector::Zero(lay.size());
  lay.comp(F, 0) = e.real();
  lay.comp(F, 1) = sigma.real();
  lay.comp(F, 2) = w * u.real();
  lay.comp(F, 3) = p.imag();
  lay.comp(G, 0) = sigma.imag();
  lay.comp(G, 1) = -e.imag();
  lay.comp(G, 2) = p.real();
  lay.comp(G, 3) = w * u.imag();
  const DualState out = apply_constitutive(FieldState{lay, F}, L);
  EXPECT_LT((out.values - G).norm(), 1e-12 * G.norm());
}

TEST(MaterialField, NodalAveragesAndErrors) {
  auto mesh = std::make_shared<Mesh>(Mesh::interval({0.0, 1.0, 3.0}, {0, 1}));
  const ComplexModuli a = ComplexModuli::elastic(Complex(1, 1), Complex(1, -1), 1.0);
  const ComplexModuli b = ComplexModuli::elastic(Complex(2, 1), Complex(4, -1), 1.0);
  const MaterialField mat = MaterialField::build(*mesh, Physics::elastic, 1.0, {a, b});
  EXPECT_EQ(mat.cell[1](0, 0), Complex(2, 1));
  // Middle node: (0.5 * 1 + 1.0 * 4) / 1.5.
  EXPECT_NEAR(mat.node[1](0, 0).real(), 3.0, 1e-14);
  EXPECT_THROW(MaterialField::build(*mesh, Physics::elastic, 1.0, {a}), ValidationError);
  EXPECT_THROW(MaterialField::build(*mesh, Physics::acoustic, 1.0, {a, b}), ValidationError);
}

TEST(BuildSourceData, Examples) {
  const double w = 2.0;
  {
    const Discretization d(unit_rod(6), Physics::elastic);
    const BoundarySpec bc = make_boundary_spec(d, {dirichlet("left", 0.0), neumann("right", 0.0)});
    const SourceData s = build_source_data(d, CVector::Zero(d.num_phi()), bc, w);
    EXPECT_EQ(s.g0.norm(), 0.0);
  }
  {
    // f'' = 3 with zero targets: p'_0 = f'' / w.
    const Discretization d(unit_rod(6), Physics::elastic);
    const BoundarySpec bc = make_boundary_spec(d, {dirichlet("left", 0.0), dirichlet("right", 0.0)});
    const SourceData s = build_source_data(d, CVector::Constant(d.num_phi(), Complex(0, 3)), bc, w);
    const FieldLayout lay(d);
    EXPECT_LT((lay.comp(s.g0, 2).array() - 1.5).abs().maxCoeff(), 1e-14);
    EXPECT_EQ(lay.comp(s.g0, 0).norm(), 0.0);
  }
  {
    // u''_0 = 2x on one cell: e''_0 = 2 (stored as -e'').
    const Discretization d(unit_rod(1), Physics::elastic);
    const BoundarySpec bc = make_boundary_spec(d, {dirichlet("left", 0.0), dirichlet("right", Complex(0, 2))});
    const SourceData s = build_source_data(d, CVector::Zero(2), bc, w);
    const FieldLayout lay(d);
    EXPECT_NEAR(lay.comp(s.g0, 1)(0), -2.0, 1e-14);
    EXPECT_LT(dual_constraint_residual(s.g0, lay, d, s.force, w), 1e-13);
  }
}

TEST(BuildSourceData, AdmissibleForEveryPhysics) {
  std::mt19937_64 rng(6);
  const Complex I(0, 1);
  for (Physics ph : {Physics::elastic, Physics::acoustic, Physics::electromagnetic}) {
    const Discretization d(unit_rod(7), ph);
    const BoundarySpec bc =
        make_boundary_spec(d, {dirichlet("left", Complex(0.3, -0.7)), neumann("right", Complex(1.1, 0.4))});
    const auto nf = force_size(d);
    const CVector f = random_vector(rng, nf).cast<Complex>() + I * random_vector(rng, nf).cast<Complex>();
    const SourceData s = build_source_data(d, f, bc, 1.3);
    EXPECT_LT(dual_constraint_residual(s.g0, FieldLayout(d), d, f, 1.3), 1e-12);
  }
  const Discretization d(unit_rod(3), Physics::elastic);
  EXPECT_THROW(build_source_data(d, CVector::Zero(2), BoundarySpec{}, 1.0), ValidationError);
}

TEST(BoundarySpec, SideValidation) {
  const Discretization d(unit_rod(3), Physics::elastic);
  EXPECT_THROW(make_boundary_spec(d, {dirichlet("left", 0.0)}), ValidationError);
  EXPECT_THROW(make_boundary_spec(d, {dirichlet("left", 0.0), dirichlet("top", 0.0)}), ValidationError);
  SideCondition two = dirichlet("right", 0.0);
  two.value = CVector::Zero(2);
  EXPECT_THROW(make_boundary_spec(d, {dirichlet("left", 0.0), two}), ValidationError);
}

TEST(BoundaryResidual, ZeroAndExactFields) {
  for (Physics ph : {Physics::elastic, Physics::acoustic, Physics::electromagnetic}) {
    const ComplexModuli m = ph == Physics::elastic ? rod_elastic() : ph == Physics::acoustic ? rod_acoustic() : rod_em();
    ProblemSpec spec = rod(ph, m, 21, RodBc::neumann);
    const DiscreteProblem p(spec);
    const ComplexSolution oracle = solve_direct_complex(p);
    const FieldState F = field_from_complex(oracle, p.disc(), p.source().force, p.omega());
    const DualState G = apply_constitutive(F, p.L());
    for (const auto& r : boundary_residual(F, G, p.disc(), p.source(), p.omega()))
      EXPECT_LT(std::abs(r.value), 1e-10) << "physics " << to_string(ph) << " node " << r.node;

    const ProblemSpec zero = rod(ph, m, 21, RodBc::dirichlet);
    ProblemSpec z = zero;
    z.boundary = {dirichlet("left", 0.0), neumann("right", 0.0)};
    const DiscreteProblem pz(z);
    const FieldState F0{pz.layout(), Vector::Zero(pz.layout().size())};
    const DualState G0{pz.layout(), Vector::Zero(pz.layout().size())};
    for (const auto& r : boundary_residual(F0, G0, pz.disc(), pz.source(), pz.omega())) EXPECT_EQ(r.value, 0.0);
  }
}

// A perturbation delta of the primary sigma' in the boundary cell, followed
// by re-completion, moves the dual potential residual linearly in delta.
TEST(BoundaryResidual, LinearSensitivity) {
  const DiscreteProblem p(rod(Physics::elastic, rod_elastic(), 21, RodBc::dirichlet));
  const ComplexSolution oracle = solve_direct_complex(p);
  const FieldState F = field_from_complex(oracle, p.disc(), p.source().force, p.omega());
  const int right = p.mesh().num_nodes() - 1;
  auto right_residual = [&](double delta) {
    Primary pr = primary_from_field(F, p.omega());
    pr.y(p.mesh().num_cells() - 1) += delta;
    const FieldState Fp = complete_trial_field(pr, p.disc(), p.source().force, p.omega());
    const DualState G = apply_constitutive(Fp, p.L());
    double v = 0.0;
    for (const auto& r : boundary_residual(Fp, G, p.disc(), p.source(), p.omega()))
      if (!r.flux && r.node == right) v = r.value;
    return v;
  };
  const double r0 = right_residual(0.0);
  EXPECT_LT(std::abs(r0), 1e-10);
  const double r1 = right_residual(1e-3) - r0;
  const double r2 = right_residual(2e-3) - r0;
  EXPECT_GT(std::abs(r1), 1e-6);
  EXPECT_NEAR(r2 / r1, 2.0, 1e-6);
}

TEST(ComplexFields, RoundTrip) {
  const DiscreteProblem p(rod(Physics::acoustic, rod_acoustic(), 11, RodBc::neumann));
  const ComplexSolution s = solve_direct_complex(p);
  const FieldState F = field_from_complex(s, p.disc(), p.source().force, p.omega());
  const ComplexSolution back = complex_from_fields(F, p.L() * F.values, p.disc(), p.source().force, p.omega());
  EXPECT_LT((back.potential - s.potential).norm(), 1e-12 * s.potential.norm());
  EXPECT_LT((back.flux - s.flux).norm(), 1e-12 * s.flux.norm());
  EXPECT_LT((back.trace - s.trace).norm(), 1e-12 * s.trace.norm());
}

}  // namespace
}  // namespace wavemin
