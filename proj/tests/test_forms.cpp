#include <gtest/gtest.h>

#include "oracles.hpp"
#include "plateplast/forms.hpp"

#include <random>

using namespace plateplast;
using plateplast::testing::q2_closed_form;

namespace {

Mat2 e12() {
  Mat2 m = Mat2::Zero();
  m(0, 1) = 1.0;
  return m;
}

Mat3 random_mat3(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = u(rng);
  return m;
}

Mat2 random_mat2(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat2 m;
  for (int i = 0; i < 4; ++i) m(i / 2, i % 2) = u(rng);
  return m;
}

}  // namespace

TEST(Elasticity, RejectsNonPositiveConstants) {
  EXPECT_THROW(IsotropicElasticity(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(IsotropicElasticity(-1.0, 1.0), InvalidArgument);
  EXPECT_NO_THROW(IsotropicElasticity(1.0, 1.0));
}

TEST(ApplyC, IdentitySkewAndShear) {
  const IsotropicElasticity el(1.0, 1.0);
  EXPECT_NEAR((apply_C(el, Mat3::Identity()).matrix() - 5.0 * Mat3::Identity())
                  .norm(),
              0.0, 1e-14);

  Mat3 skew;
  skew << 0, 1, -2, -1, 0, 3, 2, -3, 0;
  EXPECT_EQ(apply_C(el, skew).matrix().norm(), 0.0);

  const IsotropicElasticity el2(2.0, 3.0);
  Mat3 f = Mat3::Zero();
  f(0, 1) = 1.0;
  Mat3 expected = Mat3::Zero();
  expected(0, 1) = expected(1, 0) = 3.0;
  EXPECT_NEAR((apply_C(el2, f).matrix() - expected).norm(), 0.0, 1e-14);
}

TEST(QuadraticForm, Examples) {
  const IsotropicElasticity el(1.0, 1.0);
  EXPECT_NEAR(Q(el, Mat3::Identity()), 7.5, 1e-14);
  EXPECT_NEAR(Q(el, embed(e12())), 0.5, 1e-14);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Mat3 f = random_mat3(rng);
    EXPECT_NEAR(Q(el, f), 0.5 * apply_C(el, f).dot(f), 1e-14);
  }
}

TEST(QuadraticForm, SymmetryAndGrowthBounds) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> par(0.1, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const IsotropicElasticity el(par(rng), par(rng));
    const Mat3 f = random_mat3(rng);
    const Mat3 s = 0.5 * (f + f.transpose());
    const double q = Q(el, f);
    EXPECT_NEAR(q, Q(el, s), 1e-12 * std::max(1.0, q));
    EXPECT_GE(q, el.r_C() * s.squaredNorm() * (1 - 1e-12));
    EXPECT_LE(q, el.R_C() * s.squaredNorm() * (1 + 1e-12));
  }
}

TEST(RelaxA, IdentityMatchesGridOracle) {
  const IsotropicElasticity el(1.0, 1.0);
  const Sym3 a = relax_A(el, Mat2::Identity());
  EXPECT_NEAR(a(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(a(1, 2), 0.0, 1e-12);
  EXPECT_NEAR(a(2, 2), -2.0 / 3.0, 1e-12);

  const Eigen::Vector3d grid =
      plateplast::testing::relax_oracle_grid(el, Mat2::Identity());
  // Value-based search resolves the argmin to about sqrt(machine eps).
  EXPECT_NEAR(grid(0), 0.0, 1e-7);
  EXPECT_NEAR(grid(1), 0.0, 1e-7);
  EXPECT_NEAR(grid(2), -2.0 / 3.0, 1e-7);
}

TEST(RelaxA, TracelessInputHasNoOutOfPlaneCorrection) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> par(0.1, 10.0);
  for (int i = 0; i < 20; ++i) {
    const IsotropicElasticity el(par(rng), par(rng));
    Mat2 f = random_mat2(rng);
    f = 0.5 * (f + f.transpose());
    f(1, 1) = -f(0, 0);
    const Sym3 a = relax_A(el, f);
    const Eigen::Vector3d oracle = plateplast::testing::relax_oracle_fd(el, f);
    EXPECT_NEAR(a(0, 2), 0.0, 1e-12);
    EXPECT_NEAR(a(1, 2), 0.0, 1e-12);
    EXPECT_NEAR(a(2, 2), 0.0, 1e-12);
    EXPECT_NEAR(oracle.norm(), 0.0, 1e-8);
  }
}

TEST(RelaxA, Linear) {
  std::mt19937_64 rng(4);
  const IsotropicElasticity el(2.5, 0.7);
  for (int i = 0; i < 100; ++i) {
    const Mat2 f1 = random_mat2(rng);
    const Mat2 f2 = random_mat2(rng);
    const Mat3 lhs = relax_A(el, Mat2(f1 + f2)).matrix();
    const Mat3 rhs = relax_A(el, f1).matrix() + relax_A(el, f2).matrix();
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
  }
}

TEST(Q2, ExamplesAgainstClosedFormAndOracle) {
  const IsotropicElasticity el(1.0, 1.0);
  EXPECT_NEAR(Q2(el, Mat2(Mat2::Identity())), 10.0 / 3.0, 1e-12);
  EXPECT_NEAR(Q2(el, e12()), 0.5, 1e-12);

  const Eigen::Vector3d l =
      plateplast::testing::relax_oracle_fd(el, Mat2::Identity());
  EXPECT_NEAR(Q(el, plateplast::testing::relaxed_candidate(Mat2::Identity(), l)),
              10.0 / 3.0, 1e-9);
}

TEST(Q2, BelowPaddedQAndPositiveDefinite) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> par(0.1, 10.0);
  for (int i = 0; i < 500; ++i) {
    const IsotropicElasticity el(par(rng), par(rng));
    const Mat2 f = random_mat2(rng);
    const Mat2 s = 0.5 * (f + f.transpose());
    const double q2 = Q2(el, f);
    EXPECT_LE(q2, Q(el, embed(f)) + 1e-12);
    EXPECT_GE(q2, el.mu() * s.squaredNorm() * (1 - 1e-12));
    EXPECT_NEAR(q2, q2_closed_form(el, f), 1e-10 * std::max(1.0, q2));
  }
}

TEST(ApplyC2, ThirdColumnVanishes) {
  const IsotropicElasticity el(1.0, 1.0);
  const Sym3 c = apply_C2(el, Mat2(Mat2::Identity()));
  EXPECT_LT(c.matrix().col(2).norm(), 1e-12);

  const Sym3 shear = apply_C2(el, e12());
  Mat2 expected;
  expected << 0, 1, 1, 0;
  EXPECT_LT((shear.block2().matrix() - expected).norm(), 1e-12);
}

TEST(ApplyC2, OnlyPlaneBlockOfTestMatrixMatters) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> par(0.1, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const IsotropicElasticity el(par(rng), par(rng));
    const Mat2 f = random_mat2(rng);
    const Mat3 g = random_mat3(rng);
    const Sym3 c = apply_C2(el, f);
    const Mat3 g_plane = embed(Mat2(0.5 * (g.topLeftCorner<2, 2>() +
                                           g.topLeftCorner<2, 2>().transpose())));
    // Third column of C2 F vanishes up to the rounding of the solve, which
    // scales with the moduli.
    const double scale = (el.lam() + el.mu()) * f.norm() * g.norm();
    EXPECT_LT(std::abs(c.dot(g) - c.dot(g_plane)), 1e-13 * scale + 1e-15);
    EXPECT_LT(c.matrix().col(2).norm(), 1e-13 * (el.lam() + el.mu()) * f.norm());
    EXPECT_NEAR(c.dot(embed(f)), 2.0 * Q2(el, f), 1e-12 * scale + 1e-14);
  }
}

TEST(PlaneStiffness, ReproducesQ2) {
  std::mt19937_64 rng(7);
  const IsotropicElasticity el(1.3, 0.4);
  const Eigen::Matrix3d d = plane_stiffness(el);
  for (int i = 0; i < 50; ++i) {
    const Mat2 f = random_mat2(rng);
    const Mat2 s = 0.5 * (f + f.transpose());
    const Eigen::Vector3d v(s(0, 0), s(1, 1), 2.0 * s(0, 1));
    EXPECT_NEAR(0.5 * v.dot(d * v), Q2(el, f), 1e-13);
  }
}

TEST(Hardening, IsotropicValuesAndGradient) {
  const auto h1 = HardeningForm::isotropic(1.0);
  EXPECT_EQ(B_eval(h1, DeviatoricTensor()), 0.0);

  const auto h2 = HardeningForm::isotropic(2.0);
  // |p|^2 = 1 + 1 + 0 + 2 * 0.5 = 3 with p11 = 1, p22 = -1, p12 = sqrt(.5).
  const DeviatoricTensor p(1.0, -1.0, std::sqrt(0.5), 0.0, 0.0);
  EXPECT_NEAR(p.norm_sq(), 3.0, 1e-14);
  EXPECT_NEAR(B_eval(h2, p), 3.0, 1e-14);

  EXPECT_THROW(HardeningForm::isotropic(0.0), InvalidArgument);
}

TEST(Hardening, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(8);
  HardeningForm::Mat6 a = HardeningForm::Mat6::Random();
  const HardeningForm::Mat6 bb =
      a * a.transpose() + 0.5 * HardeningForm::Mat6::Identity();
  for (const auto& h : {HardeningForm::isotropic(1.7), HardeningForm::tensor(bb)}) {
    for (int trial = 0; trial < 20; ++trial) {
      const DeviatoricTensor p = plateplast::testing::random_deviatoric(rng, 1.0);
      const Mat3 g = B_grad(h, p).matrix();
      const double step = 1e-5;
      Mat3 fd = Mat3::Zero();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Mat3 dp = Mat3::Zero();
          dp(i, j) = step;
          fd(i, j) = (B_eval(h, Mat3(p.matrix() + dp)) -
                      B_eval(h, Mat3(p.matrix() - dp))) /
                     (2 * step);
        }
      // Off-diagonal partials split evenly between (i,j) and (j,i).
      EXPECT_LT((fd - g).norm(), 1e-6 * g.norm());
      EXPECT_GE(B_eval(h, p), 0.5 * h.c6() * p.norm_sq() * (1 - 1e-12));
    }
  }
}

TEST(Hardening, TensorModeRejectsIndefinite) {
  HardeningForm::Mat6 bb = HardeningForm::Mat6::Identity();
  bb(3, 3) = -1.0;
  EXPECT_THROW(HardeningForm::tensor(bb), InvalidArgument);
}

TEST(Dissipation, FrobeniusExamples) {
  const auto d = DissipationDensity::frobenius(10.0);
  EXPECT_EQ(H_eval(d, DeviatoricTensor()), 0.0);
  const DeviatoricTensor q(0.1, -0.1, 0.0, 0.0, 0.0);
  EXPECT_NEAR(H_eval(d, q), std::sqrt(2.0), 1e-14);

  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const DeviatoricTensor r = plateplast::testing::random_deviatoric(rng, 1.0);
    EXPECT_EQ(H_eval(d, r * 2.0), 2.0 * H_eval(d, r));
  }
}

TEST(Dissipation, GaugeHomogeneityTriangleAndBounds) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec5> dirs;
  for (int i = 0; i < 12; ++i) {
    Vec5 v;
    for (int j = 0; j < 5; ++j) v(j) = n(rng);
    dirs.push_back(v);
  }
  const auto frob = DissipationDensity::frobenius(3.0);
  const auto gauge = DissipationDensity::gauge(3.0, dirs);
  std::uniform_real_distribution<double> c(0.0, 5.0);
  for (const auto* d : {&frob, &gauge}) {
    for (int i = 0; i < 1000; ++i) {
      const DeviatoricTensor q1 = plateplast::testing::random_deviatoric(rng, 1.0);
      const DeviatoricTensor q2 = plateplast::testing::random_deviatoric(rng, 1.0);
      const double s = c(rng);
      EXPECT_NEAR(H_eval(*d, q1 * s), s * H_eval(*d, q1), 1e-13);
      EXPECT_LE(H_eval(*d, q1 + q2), H_eval(*d, q1) + H_eval(*d, q2) + 1e-13);
      EXPECT_GE(H_eval(*d, q1), d->r_K() * q1.norm() * (1 - 1e-12));
      EXPECT_LE(H_eval(*d, q1), d->R_K() * q1.norm() * (1 + 1e-12));
    }
  }
}

TEST(Dissipation, GaugeNeedsSpanningDirections) {
  std::vector<Vec5> dirs(5, Vec5::Unit(0));
  EXPECT_THROW(DissipationDensity::gauge(1.0, dirs), InvalidArgument);
}

TEST(Deviatoric, TraceFreeAndCoordinatesIsometric) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const DeviatoricTensor p = plateplast::testing::random_deviatoric(rng, 3.0);
    EXPECT_EQ(p.p11() + p.p22() + p.p33(), 0.0);
    EXPECT_NEAR(p.matrix().trace(), 0.0, 1e-15);
    EXPECT_NEAR(p.coords().norm(), p.norm(), 1e-13);
    EXPECT_NEAR(p.matrix().norm(), p.norm(), 1e-13);
    const DeviatoricTensor back = DeviatoricTensor::from_coords(p.coords());
    EXPECT_LT((back - p).norm(), 1e-14);
  }
}
