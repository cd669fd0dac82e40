// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace wavemin {
namespace {

using namespace wavemin::testing;

ComplexModuli moduli_for(Physics p) {
  switch (p) {
    case Physics::elastic: return rod_elastic();
    case Physics::acoustic: return rod_acoustic();
    case Physics::electromagnetic: return rod_em();
  }
  return {};
}

const Physics kAll[] = {Physics::elastic, Physics::acoustic, Physics::electromagnetic};

ProblemSpec forced_rod(Physics ph, int nodes) {
  ProblemSpec s = rod(ph, moduli_for(ph), nodes, RodBc::neumann);
  const DiscreteProblem tmp(s);
  const auto n = force_size(tmp.disc());
  s.force = CVector(n);
  for (Eigen::Index i = 0; i < n; ++i) s.force(i) = Complex(std::sin(0.3 * i), 0.5 * std::cos(0.2 * i));
  return s;
}

TEST(Functional, ZeroFieldAndPositivity) {
  std::mt19937_64 rng(1);
  for (Physics ph : kAll) {
    const DiscreteProblem p(forced_rod(ph, 15));
    const FieldState zero{p.layout(), Vector::Zero(p.layout().size())};
    EXPECT_EQ(evaluate_functional(zero, p).total, 0.0);
    const DiscreteProblem h = p.homogeneous();
    for (int k = 0; k < 5; ++k) EXPECT_GT(evaluate_functional(random_trial(h, rng), h).total, 0.0);
    EXPECT_THROW(evaluate_functional(FieldState{p.layout(), Vector::Zero(3)}, p), ValidationError);
  }
}

// J(z) = 1/2 z^T H z - b^T z + j0 agrees with the assembled volume integral.
TEST(Functional, ReducedQuadraticMatchesVolumeIntegral) {
  std::mt19937_64 rng(2);
  for (Physics ph : kAll) {
    const DiscreteProblem p(forced_rod(ph, 12));
    for (int k = 0; k < 5; ++k) {
      const Vector z = random_vector(rng, p.num_unknowns());
      const double J = evaluate_functional(p.field_state(z), p).total;
      EXPECT_NEAR(p.objective(z), J, 1e-12 * std::max(1.0, std::abs(J)));
    }
  }
}

TEST(BoundaryForm, DiffersByDataOnlyConstant) {
  std::mt19937_64 rng(3);
  for (Physics ph : kAll) {
    const DiscreteProblem p(forced_rod(ph, 17));
    double first = 0.0;
    for (int k = 0; k < 10; ++k) {
      const FieldState F = random_trial(p, rng);
      const FunctionalValue b = evaluate_boundary_form(F, p);
      EXPECT_DOUBLE_EQ(b.total, b.volume_term + b.boundary_term);
      const double diff = b.total - evaluate_functional(F, p).total;
      if (k == 0) first = diff;
      EXPECT_NEAR(diff, first, 1e-11 * std::max(1.0, std::abs(first))) << to_string(ph);
    }
  }
}

TEST(BoundaryForm, AgreesWithoutData) {
  std::mt19937_64 rng(4);
  for (Physics ph : kAll) {
    const DiscreteProblem h = DiscreteProblem(forced_rod(ph, 9)).homogeneous();
    const FieldState zero{h.layout(), Vector::Zero(h.layout().size())};
    EXPECT_EQ(evaluate_boundary_form(zero, h).total, 0.0);
    const FieldState F = random_trial(h, rng);
    EXPECT_NEAR(evaluate_boundary_form(F, h).total, evaluate_functional(F, h).total,
                1e-13 * std::abs(evaluate_functional(F, h).total));
  }
}

TEST(Gradient, VanishesAtOracleSolution) {
  for (Physics ph : kAll) {
    const DiscreteProblem p(forced_rod(ph, 21));
    const ComplexSolution s = solve_direct_complex(p);
    const FieldState F = field_from_complex(s, p.disc(), p.source().force, p.omega());
    EXPECT_LT(gradient(F, p).norm(), 1e-10 * std::max(1.0, p.rhs().norm())) << to_string(ph);
  }
}

TEST(Gradient, ZeroFieldGivesMinusLoad) {
  std::mt19937_64 rng(5);
  const DiscreteProblem h = DiscreteProblem(rod(Physics::elastic, rod_elastic(), 11, RodBc::neumann)).homogeneous();
  const Vector g = random_vector(rng, h.layout().size());
  const DiscreteProblem q = h.with_load(g);
  const Vector load = q.A().transpose() * q.weights().cwiseProduct(g);
  EXPECT_LT((q.gradient(Vector::Zero(q.num_unknowns())) + load).norm(), 1e-13 * load.norm());
}

// Five-point central difference of J along a random direction.
TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (Physics ph : kAll) {
    const DiscreteProblem p(forced_rod(ph, 13));
    for (int k = 0; k < 5; ++k) {
      const Vector z = random_vector(rng, p.num_unknowns());
      const Vector dir = random_vector(rng, p.num_unknowns());
      const double h = 1e-5 * std::max(1.0, z.norm());
      auto J = [&](double s) { return evaluate_functional(p.field_state(z + s * dir), p).total; };
      const double fd = (-J(2 * h) + 8 * J(h) - 8 * J(-h) + J(-2 * h)) / (12 * h);
      const double an = gradient(p.field_state(z), p).dot(dir);
      EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an))) << to_string(ph);
    }
  }
}

TEST(Functional, Convexity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (Physics ph : kAll) {
    const DiscreteProblem p(forced_rod(ph, 11));
    for (int k = 0; k < 20; ++k) {
      const Vector z1 = random_vector(rng, p.num_unknowns()), z2 = random_vector(rng, p.num_unknowns());
      const double t = ud(rng);
      auto J = [&](const Vector& z) { return evaluate_functional(p.field_state(z), p).total; };
      const double scale = std::abs(J(z1)) + std::abs(J(z2)) + 1.0;
      EXPECT_LE(J(t * z1 + (1 - t) * z2), t * J(z1) + (1 - t) * J(z2) + 1e-12 * scale);
    }
  }
}

TEST(MinimumValueSurface, ZeroDataAndForceGuard) {
  SurfaceData s;
  s.potential = CVector::Zero(2);
  s.flux = CVector::Zero(2);
  s.target_potential = Vector::Zero(2);
  s.target_flux = Vector::Zero(2);
  for (Physics ph : kAll) {
    s.physics = ph;
    EXPECT_EQ(minimum_value_surface(s, 2.0), 0.0);
  }
  EXPECT_THROW(minimum_value_surface(s, 2.0, 1.0), ValidationError);
}

TEST(MinimumValueSurface, EqualsFunctionalAtOracle) {
  for (Physics ph : kAll)
    for (RodBc bc : {RodBc::dirichlet, RodBc::neumann, RodBc::mixed_selection}) {
      const DiscreteProblem p(rod(ph, moduli_for(ph), 31, bc));
      const ComplexSolution s = solve_direct_complex(p);
      const FieldState F = field_from_complex(s, p.disc(), p.source().force, p.omega());
      const double J = evaluate_functional(F, p).total;
      const double S = minimum_value_surface(surface_data(s, p), p.omega());
      EXPECT_NEAR(J, S, 1e-10 * std::max(std::abs(J), 1e-300)) << to_string(ph);
    }
}

// Doubling the elastic flux target shifts the value by -u' . (sigma''_0 n).
TEST(MinimumValueSurface, LinearInFluxTarget) {
  const DiscreteProblem p(rod(Physics::elastic, rod_elastic(), 21, RodBc::neumann));
  const SurfaceData s = surface_data(solve_direct_complex(p), p);
  SurfaceData d = s;
  d.target_flux = Vector::Constant(s.target_flux.size(), 0.7);
  SurfaceData d2 = d;
  d2.target_flux *= 2.0;
  const double shift = minimum_value_surface(d2, p.omega()) - minimum_value_surface(d, p.omega());
  EXPECT_NEAR(shift, -s.potential.real().dot(d.target_flux), 1e-13);
}

TEST(Tomography, BoundHoldsForOracleMeasurements) {
  std::mt19937_64 rng(8);
  for (Physics ph : kAll) {
    const DiscreteProblem p(rod(ph, moduli_for(ph), 31, RodBc::neumann));
    const ComplexSolution exact = solve_direct_complex(p);
    const SurfaceData m = surface_data(exact, p);
    const double scale = std::max(1.0, m.potential.norm() * m.flux.norm());
    const FieldState Fe = field_from_complex(exact, p.disc(), p.source().force, p.omega());
    EXPECT_LE(std::abs(tomography_slack(Fe, m, p)), 1e-10 * scale) << to_string(ph);
    for (int k = 0; k < 20; ++k) EXPECT_GE(tomography_slack(random_trial(p, rng), m, p), -1e-10 * scale);

    // Zero trial: the slack is minus the measured right-hand side.
    const FieldState zero{p.layout(), Vector::Zero(p.layout().size())};
    const Vector u1 = m.potential.real(), u2 = m.potential.imag(), t1 = m.flux.real(), t2 = m.flux.imag();
    double expect = 0.0;
    switch (ph) {
      case Physics::elastic: expect = -0.5 * (-u1.dot(t2) + u2.dot(t1)); break;
      case Physics::acoustic: expect = -0.5 * p.omega() * (u1.dot(t1) + u2.dot(t2)); break;
      case Physics::electromagnetic: expect = -0.5 / p.omega() * (t1.dot(u1) + u2.dot(t2)); break;
    }
    const double z = tomography_slack(zero, m, p);
    EXPECT_NEAR(z, expect, 1e-12 * scale);
    EXPECT_GE(z, -1e-10 * scale);
  }
}

TEST(Tomography, Errors) {
  const DiscreteProblem p(forced_rod(Physics::elastic, 9));
  const SurfaceData m = surface_data(solve_direct_complex(p), p);
  const FieldState zero{p.layout(), Vector::Zero(p.layout().size())};
  EXPECT_THROW(tomography_slack(zero, m, p), ValidationError);
  const DiscreteProblem q(rod(Physics::elastic, rod_elastic(), 9, RodBc::neumann));
  SurfaceData partial = surface_data(solve_direct_complex(q), q);
  partial.flux = CVector::Zero(1);
  EXPECT_THROW(tomography_slack(zero, partial, q), ValidationError);
}

TEST(Dissipation, SingleCellExample) {
  auto mesh = std::make_shared<Mesh>(Mesh::uniform_interval(0.0, 1.0, 1));
  const MaterialField mat =
      MaterialField::build(*mesh, Physics::elastic, 2.0, {ComplexModuli::elastic(Complex(3, 1), Complex(1, -0.1), 2.0)});
  ComplexSolution s;
  s.physics = Physics::elastic;
  s.potential = CVector::Zero(2);
  s.aux = CVector::Constant(1, 1.0);
  const DissipationReport r = dissipation_rate(s, mat, *mesh);
  EXPECT_DOUBLE_EQ(r.mean_power, 1.0);
  EXPECT_DOUBLE_EQ(r.inertial_part, 0.0);
  s.aux.setZero();
  EXPECT_EQ(dissipation_rate(s, mat, *mesh).mean_power, 0.0);
}

TEST(Dissipation, PositiveAndBalancedAtOracle) {
  for (Physics ph : kAll) {
    ProblemSpec spec = forced_rod(ph, 25);
    const DiscreteProblem p(spec);
    const ComplexSolution s = solve_direct_complex(p);
    const DissipationReport r = dissipation_rate(s, p.material(), p.mesh());
    EXPECT_GT(r.mean_power, 0.0);
    EXPECT_GT(r.stiffness_part, 0.0);
    EXPECT_GT(r.inertial_part, 0.0);
    const double work = boundary_working_rate(s, p.disc(), spec.force, spec.omega);
    EXPECT_NEAR(r.mean_power, work, 1e-9 * r.mean_power) << to_string(ph);
  }
}

}  // namespace
}  // namespace wavemin
