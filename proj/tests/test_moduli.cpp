// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace wavemin {
namespace {

using testing::random_passive;
using testing::random_spd;
using testing::random_symmetric;
using testing::random_vector;

const Complex I(0.0, 1.0);

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

TEST(BuildBlocks, ScalarElasticExamples) {
  const auto [C, P] = build_blocks(ComplexModuli::elastic(Complex(2, 1), Complex(1, -1), 1.0));
  EXPECT_LT((C.dense() - mat2(5, -2, -2, 1)).norm(), 1e-14);
  EXPECT_LT((P.dense() - mat2(2, -1, -1, 1)).norm(), 1e-14);
}

TEST(BuildBlocks, AcousticAndElectromagneticExamples) {
  const auto [K, R] = build_blocks(ComplexModuli::acoustic(Complex(1, -2), Complex(1, 1), 1.0));
  EXPECT_LT((K.dense() - mat2(2.5, -0.5, -0.5, 0.5)).norm(), 1e-14);
  const auto [E, M] = build_blocks(ComplexModuli::electromagnetic(Complex(1, 2), Complex(1, 1), 1.0));
  EXPECT_LT((E.dense() - mat2(2.5, -0.5, -0.5, 0.5)).norm(), 1e-14);
}

TEST(BuildBlocks, RandomAnisotropicStiffnessIsPositiveDefinite) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    const CMatrix C = random_symmetric(rng, 3).cast<Complex>() + I * random_spd(rng, 3).cast<Complex>();
    const CGBlock b = tensor_block(C, 1.0, "stiffness");
    const Eigen::SelfAdjointEigenSolver<Matrix> es(b.dense());
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(BuildBlocks, ErrorsNameTheTensor) {
  CMatrix C(2, 2);
  C << Complex(1, 1), Complex(0.5, 0), Complex(0.2, 0), Complex(1, 1);
  EXPECT_THROW(build_blocks(ComplexModuli::elastic(C, CMatrix::Identity(1, 1) * Complex(1, -1), 1.0)),
               ValidationError);

  CMatrix bad = CMatrix::Identity(3, 3) * Complex(1, 1);
  bad(2, 2) = Complex(1, -0.5);
  try {
    build_blocks(ComplexModuli::elastic(bad, CMatrix::Identity(2, 2) * Complex(1, -1), 1.0));
    FAIL() << "expected a passivity error";
  } catch (const PassivityError& e) {
    EXPECT_EQ(e.tensor(), "stiffness");
  }
  try {
    build_blocks(ComplexModuli::elastic(Complex(1, 1), Complex(1, 0.5), 1.0));
    FAIL() << "expected a passivity error";
  } catch (const PassivityError& e) {
    EXPECT_EQ(e.tensor(), "density");
  }
}

TEST(AssembleL, IdentityAndBlockProduct) {
  const OperatorL id = assemble_L(CGBlock::identity(2), CGBlock::identity(3));
  EXPECT_EQ(id.size(), 10);
  EXPECT_EQ((id.dense() - Matrix::Identity(10, 10)).norm(), 0.0);

  const OperatorL L = assemble_L(ComplexModuli::elastic(Complex(2, 1), Complex(1, -1), 1.0));
  Vector f(4), want(4);
  f << 1, 0, 1, 0;
  want << 5, -2, 2, -1;
  EXPECT_LT((L.apply(f) - want).norm(), 1e-14);
}

TEST(AssembleL, SpectrumIsUnionOfBlockSpectra) {
  std::mt19937_64 rng(3);
  const CGBlock a = CGBlock::from_dense(random_spd(rng, 4));
  const CGBlock b = CGBlock::from_dense(random_spd(rng, 2));
  const OperatorL L = assemble_L(a, b);
  const Matrix d = L.dense();
  EXPECT_LT((d - d.transpose()).norm(), 1e-14);
  Vector both(6);
  both << Eigen::SelfAdjointEigenSolver<Matrix>(a.dense()).eigenvalues(),
      Eigen::SelfAdjointEigenSolver<Matrix>(b.dense()).eigenvalues();
  std::sort(both.data(), both.data() + both.size());
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(d).eigenvalues();
  EXPECT_LT((ev - both).cwiseAbs().maxCoeff(), 1e-12 * ev.cwiseAbs().maxCoeff());
}

TEST(AssembleL, RejectsMismatchedBlocks) {
  CGBlock bad = CGBlock::identity(2);
  bad.b = Matrix::Zero(3, 2);
  EXPECT_THROW(assemble_L(bad, CGBlock::identity(1)), ValidationError);
}

// (e', s) C (e', s)^T = e' C'' e' + (C' e' - s) C''^-1 (C' e' - s).
TEST(Identities, QuadraticForm) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const Matrix re = random_symmetric(rng, 3), im = random_spd(rng, 3);
    const CGBlock blk = legendre_block(re.cast<Complex>() + I * im.cast<Complex>());
    const Vector e = random_vector(rng, 3), s = random_vector(rng, 3);
    Vector es(6);
    es << e, s;
    const double lhs = es.dot(blk.dense() * es);
    const Vector r = re * e - s;
    const double rhs = e.dot(im * e) + r.dot(im.fullPivLu().solve(r));
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

// 1/2 (a, b) [[X'', X'], [X', -X'']] (a, b) = min_s { s b + 1/2 (a, s) B (a, s) },
// attained at s = X' a - X'' b.
void check_legendre(const CMatrix& X, const CGBlock& blk, std::mt19937_64& rng) {
  const Matrix re = X.real(), im = X.imag();
  const auto n = re.rows();
  const Vector a = random_vector(rng, n), b = random_vector(rng, n);
  const double lhs = 0.5 * (a.dot(im * a) + 2.0 * a.dot(re * b) - b.dot(im * b));
  const Vector s = re * a - im * b;
  Vector as(2 * n);
  as << a, s;
  const double at = s.dot(b) + 0.5 * as.dot(blk.dense() * as);
  EXPECT_NEAR(lhs, at, 1e-12 * std::max(1.0, std::abs(lhs)));
  const Vector stationarity = blk.b.transpose() * a + blk.d * s + b;
  EXPECT_LT(stationarity.norm(), 1e-11 * std::max(1.0, s.norm()));
  const Vector s2 = s + random_vector(rng, n, 0.1);
  as << a, s2;
  EXPECT_GE(s2.dot(b) + 0.5 * as.dot(blk.dense() * as), at - 1e-12 * std::max(1.0, std::abs(at)));
}

TEST(Identities, LegendrePrimalAndDual) {
  std::mt19937_64 rng(9);
  auto oriented = [](const CMatrix& x, double sign) { return sign > 0 ? x : CMatrix(x.conjugate()); };
  for (Physics ph : {Physics::elastic, Physics::acoustic, Physics::electromagnetic})
    for (int k = 0; k < 200; ++k) {
      const ComplexModuli m = random_passive(rng, ph, 1 + k % 2, 1.5);
      const auto [C, P] = build_blocks(m);
      check_legendre(oriented(m.primal, primal_sign(ph)), C, rng);
      check_legendre(oriented(m.dual, dual_sign(ph)), P, rng);
    }
}

// sigma = C e, p = i w rho u, converted to real blocks: G = L F.
TEST(Identities, ConstitutiveEquivalence) {
  std::mt19937_64 rng(21);
  const double w = 1.7;
  for (int k = 0; k < 50; ++k) {
    const ComplexModuli m = random_passive(rng, Physics::elastic, 3, w);
    const OperatorL L = assemble_L(m);
    const CVector e = random_vector(rng, 6).cast<Complex>() + I * random_vector(rng, 6).cast<Complex>();
    const CVector u = random_vector(rng, 3).cast<Complex>() + I * random_vector(rng, 3).cast<Complex>();
    const CVector sigma = m.primal * e;
    const CVector p = I * w * (m.dual * u);
    Vector F(18), G(18);
    F << e.real(), sigma.real(), w * u.real(), p.imag();
    G << sigma.imag(), -e.imag(), p.real(), w * u.imag();
    EXPECT_LT((apply_constitutive(F, L) - G).norm(), 1e-12 * std::max(1.0, G.norm()));
  }
}

TEST(Identities, BlocksPositiveDefiniteForRandomPassiveMedia) {
  std::mt19937_64 rng(17);
  for (Physics p : {Physics::elastic, Physics::acoustic, Physics::electromagnetic})
    for (int k = 0; k < 100; ++k) {
      const ComplexModuli m = random_passive(rng, p, 1 + k % 3, 2.0);
      const auto [a, b] = build_blocks(m);
      EXPECT_GT(detail::min_eigenvalue(a.dense()), 0.0);
      EXPECT_GT(detail::min_eigenvalue(b.dense()), 0.0);
    }
}

TEST(Rotation, Examples) {
  const ComplexModuli m = ComplexModuli::elastic(Complex(2, 1), Complex(1, 0), 1.0);
  const RotatedModuli r0 = rotate_moduli(m, 0.0);
  EXPECT_EQ(r0.moduli.primal, m.primal);
  EXPECT_FALSE(r0.strictly_passive);

  const RotatedModuli r1 = rotate_moduli(m, -kPi / 12);
  EXPECT_NEAR(r1.moduli.primal(0, 0).imag(), 0.448, 1e-3);
  EXPECT_NEAR(-r1.moduli.dual(0, 0).imag(), 0.259, 1e-3);
  EXPECT_TRUE(r1.strictly_passive);

  const RotatedModuli r2 = rotate_moduli(m, -kPi / 6);
  EXPECT_NEAR(r2.moduli.primal(0, 0).imag(), -0.134, 1e-3);
  EXPECT_FALSE(r2.strictly_passive);

  const ComplexModuli lossy = ComplexModuli::elastic(Complex(1, 0.5), Complex(1, -0.2), 1.0);
  EXPECT_TRUE(rotate_moduli(lossy, 0.0).strictly_passive);
}

TEST(Rotation, AutomaticChoiceRestoresPassivity) {
  const ComplexModuli m = ComplexModuli::elastic(Complex(2, 1), Complex(1, 0), 1.0);
  const RotationChoice c = choose_rotation(m);
  EXPECT_TRUE(c.passive);
  EXPECT_GT(c.theta, -kPi / 2);
  EXPECT_LT(c.theta, 0.0);
  EXPECT_GT(c.margin, 0.0);

  const ComplexModuli a = ComplexModuli::acoustic(Complex(2, -1), Complex(1, 0), 1.0);
  const RotationChoice ca = choose_rotation(a);
  EXPECT_TRUE(ca.passive);
  EXPECT_GT(ca.theta, 0.0);

  const ComplexModuli hopeless = ComplexModuli::elastic(Complex(1, 0), Complex(1, 0), 1.0);
  const ComplexModuli regions[] = {m, hopeless};
  const RotationChoice ch = choose_rotation(regions);
  EXPECT_FALSE(ch.passive);
  ASSERT_EQ(ch.failing_regions.size(), 1u);
  EXPECT_EQ(ch.failing_regions[0], 1u);
}

TEST(Passivity, Classification) {
  const ComplexModuli unit{Physics::elastic, CMatrix::Identity(3, 3) * Complex(1, 1),
                           CMatrix::Identity(2, 2) * Complex(1, -1), 1.0};
  const PassivityReport r = check_passivity(unit);
  EXPECT_TRUE(r.strictly_passive());
  EXPECT_DOUBLE_EQ(r.primal.min_eigenvalue, 1.0);
  EXPECT_DOUBLE_EQ(r.dual.min_eigenvalue, 1.0);

  const PassivityReport lossless = check_passivity(ComplexModuli::elastic(Complex(1, 1), Complex(1, 0), 1.0));
  EXPECT_EQ(lossless.dual.classification, Definiteness::semidefinite);
  EXPECT_FALSE(lossless.violated());

  CMatrix C = CMatrix::Identity(3, 3) * Complex(1, 1);
  C(1, 1) = Complex(1, -1);
  const PassivityReport bad = check_passivity({Physics::elastic, C, CMatrix::Identity(2, 2) * Complex(1, -1), 1.0});
  EXPECT_TRUE(bad.violated());
  ASSERT_NE(bad.first_failure(), nullptr);
  EXPECT_EQ(bad.first_failure()->tensor, "stiffness");
}

TEST(LosslessLimit, Examples) {
  const ReducedFormSpec e = lossless_limit(ComplexModuli::elastic(Complex(1, 1), Complex(2, 0), 4.0));
  EXPECT_DOUBLE_EQ(e.dependent(Vector::Constant(1, 8.0))(0), 1.0);
  const ReducedFormSpec a = lossless_limit(ComplexModuli::acoustic(Complex(1, -1), Complex(3, 0), 1.0));
  EXPECT_DOUBLE_EQ(a.dependent(Vector::Constant(1, 2.0))(0), 6.0);
  const ReducedFormSpec m = lossless_limit(ComplexModuli::electromagnetic(Complex(1, 1), Complex(0.2, 0), 1.0));
  EXPECT_NEAR(m.dependent(Vector::Constant(1, 1.0))(0), 5.0, 1e-14);
}

TEST(LosslessLimit, Errors) {
  EXPECT_THROW(lossless_limit(ComplexModuli::elastic(Complex(1, 1), Complex(1, -0.1), 1.0)), ValidationError);
  EXPECT_THROW(lossless_limit(ComplexModuli::elastic(CMatrix::Identity(3, 3) * Complex(1, 1),
                                                      CMatrix::Zero(2, 2), 1.0)),
               ValidationError);
}

TEST(Validation, ShapeAndSymmetry) {
  EXPECT_THROW(validate_moduli(ComplexModuli::elastic(Complex(1, 1), Complex(1, -1), 0.0)), ValidationError);
  CMatrix asym = CMatrix::Identity(3, 3) * Complex(1, 1);
  asym(0, 1) = 0.3;
  EXPECT_THROW(validate_moduli({Physics::elastic, asym, CMatrix::Identity(2, 2), 1.0}), ValidationError);
  EXPECT_THROW(validate_moduli({Physics::elastic, CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 1.0}),
               ValidationError);
  EXPECT_THROW(validate_moduli({Physics::acoustic, CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 1.0}),
               ValidationError);
}

}  // namespace
}  // namespace wavemin
