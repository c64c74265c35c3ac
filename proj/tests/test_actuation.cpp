#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "case6.hpp"
#include "olfc/actuation.hpp"
#include "olfc/error.hpp"

using namespace olfc;

TEST(TurbineGovernor, FirstOrderRhs) {
  TurbineGovernor u{1, 2.0, 0.0, 0.5, 0.1};
  // (-P_m - K^-1 w + theta) / T_m
  EXPECT_DOUBLE_EQ(tg1_rhs(1.0, 0.2, 1.5, u), (-1.0 - 0.1 + 1.5) / 2.0);
}

TEST(TurbineGovernor, SecondOrderRhs) {
  TurbineGovernor u{2, 5.0, 4.0, 0.5, 0.1};
  const auto d = tg2_rhs(1.2, 1.0, -0.1, 1.4, u);
  EXPECT_DOUBLE_EQ(d.steam_power, (-1.2 + 0.05 + 1.4) / 4.0);
  EXPECT_DOUBLE_EQ(d.mechanical_power, (-1.0 + 1.2) / 5.0);
}

TEST(TurbineGovernor, Validation) {
  EXPECT_THROW((TurbineGovernor{3, 1, 1, 0, 1}.validate()), ValidationError);
  EXPECT_THROW((TurbineGovernor{2, 1, 0, 0, 1}.validate()), ValidationError);
  EXPECT_THROW((TurbineGovernor{1, 0, 0, 0, 1}.validate()), ValidationError);
  EXPECT_NO_THROW((TurbineGovernor{1, 1, 0, 0.5, 1}.validate()));
}

TEST(W, Entries) {
  const auto w = assemble_W(4.0, 5.0, 3.4, 0.5);
  const double tau = 0.8;
  EXPECT_DOUBLE_EQ(w(0, 0), -3.4);
  EXPECT_DOUBLE_EQ(w(0, 1), -0.75);
  EXPECT_DOUBLE_EQ(w(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(w(1, 1), -tau);
  EXPECT_DOUBLE_EQ(w(1, 2), -0.5);
  EXPECT_DOUBLE_EQ(w(2, 2), -1.0);
  EXPECT_TRUE(w.isApprox(w.transpose()));
}

TEST(Jacobi, AgreesWithEigenSolver) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) a(i, j) = a(j, i) = g(rng);
    const auto ours = symmetric_eigenvalues(a);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ref(a);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(ours[i], ref.eigenvalues()[i], 1e-12 * (1.0 + a.norm()));
  }
}

TEST(Jacobi, DiagonalAndRepeated) {
  const auto e = symmetric_eigenvalues(Eigen::Vector3d(3.0, -1.0, 3.0).asDiagonal().toDenseMatrix());
  EXPECT_DOUBLE_EQ(e[0], -1.0);
  EXPECT_DOUBLE_EQ(e[1], 3.0);
  EXPECT_DOUBLE_EQ(e[2], 3.0);
}

TEST(Schur, ClosedFormMatchesNumericComplement) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ts(0.5, 10.0), tm(0.5, 10.0), d(0.1, 6.0), k(-4.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = ts(rng), b = tm(rng), c = d(rng), x = k(rng);
    if (a / b <= 0.3) continue;
    const Eigen::Matrix3d w = assemble_W(a, b, c, x);
    const Eigen::Matrix2d lower = w.bottomRightCorner<2, 2>();
    const double numeric =
        w(0, 0) - (w.block<1, 2>(0, 1) * lower.inverse() * w.block<2, 1>(1, 0))(0, 0);
    EXPECT_NEAR(droop_schur_complement(a, b, c, x), numeric, 1e-10 * (1.0 + std::abs(numeric)));
  }
}

TEST(Certificate, Case6Intervals) {
  const double lower[3] = {-2.68156, -2.43789, -3.09762};
  const double upper[3] = {2.18156, 1.52484, 1.09762};
  for (int i = 0; i < 3; ++i) {
    const auto c = droop_certificate(case6::kTs[i], case6::kTm[i], case6::kDg[i], 0.5);
    EXPECT_TRUE(c.prerequisites_hold);
    EXPECT_NEAR(c.lower, lower[i], 1e-5);
    EXPECT_NEAR(c.upper, upper[i], 1e-5);
    EXPECT_TRUE(c.inside_interval);
    EXPECT_TRUE(c.W_negdef);
  }
  EXPECT_TRUE(droop_certificate(4.0, 5.0, 3.4, 2.0).inside_interval);
  EXPECT_FALSE(droop_certificate(4.6, 6.7, 3.0, 2.0).inside_interval);
  EXPECT_FALSE(droop_certificate(5.0, 10.0, 4.2, 2.0).W_negdef);
}

TEST(Certificate, EndpointsAreSchurRoots) {
  const auto c = droop_certificate(4.0, 5.0, 3.4, 0.0);
  EXPECT_NEAR(droop_schur_complement(4.0, 5.0, 3.4, c.lower), 0.0, 1e-12);
  EXPECT_NEAR(droop_schur_complement(4.0, 5.0, 3.4, c.upper), 0.0, 1e-12);
}

TEST(Certificate, PrerequisitesFailGiveEmptyInterval) {
  // 4 T_s / T_m <= 1
  const auto c = droop_certificate(1.0, 5.0, 3.0, 0.5);
  EXPECT_FALSE(c.prerequisites_hold);
  EXPECT_FALSE(c.interval_nonempty);
  EXPECT_FALSE(c.inside_interval);
  EXPECT_THROW(droop_certificate(0.0, 1.0, 1.0, 0.5), ValidationError);
}

TEST(Certificate, RandomDrawsAgreeWithEigenvalues) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> t(0.1, 10.0), d(0.1, 10.0), k(-6.0, 6.0);
  int compared = 0;
  while (compared < 2000) {
    const double ts = t(rng), tm = t(rng), dg = d(rng), kinv = k(rng);
    const auto c = droop_certificate(ts, tm, dg, kinv);
    if (!c.prerequisites_hold) continue;
    if (std::abs(kinv - c.lower) < 1e-9 || std::abs(kinv - c.upper) < 1e-9) continue;
    EXPECT_EQ(c.inside_interval, c.W_negdef) << ts << " " << tm << " " << dg << " " << kinv;
    ++compared;
  }
}
