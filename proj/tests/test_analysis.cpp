#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "case6.hpp"
#include "olfc/analysis.hpp"
#include "olfc/error.hpp"

using namespace olfc;

namespace {

struct Reference {
  NetworkModel model = case6::network();
  Vector pm;
  SteadyState ss;
  GridState state;

  Reference() {
    pm = optimal_dispatch(case6::costs(), case6::post_loads().sum()).mechanical_power;
    ss = solve_steady_state(model, pm, case6::post_loads());
    state = {ss.eta, Vector::Constant(3, ss.omega_star)};
  }
};

Vector sinusoid(double t) {
  return (Vector(3) << 0.05 * std::sin(1.3 * t), -0.03 * std::cos(0.7 * t), 0.02 * std::sin(2.1 * t))
      .finished();
}

}  // namespace

TEST(StorageU, ZeroAtReference) {
  Reference r;
  EXPECT_NEAR(storage_U(r.model, r.state, r.state), 0.0, 1e-14);
}

TEST(StorageU, PositiveOnSampledBall) {
  Reference r;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  const Matrix& b = r.model.incidence();
  for (int k = 0; k < 2000; ++k) {
    // Perturb bus angles so eta stays in the image of B^T.
    Vector ddelta(6), dw(3);
    for (auto& v : ddelta) v = u(rng);
    for (auto& v : dw) v = u(rng);
    const GridState s{r.ss.eta + b.transpose() * ddelta, r.state.omega_g + dw};
    if ((s.eta - r.ss.eta).norm() + dw.norm() < 1e-9) continue;
    EXPECT_GT(storage_U(r.model, s, r.state), 0.0);
  }
}

TEST(StorageU, HessianMatchesFiniteDifferences) {
  Reference r;
  const auto m = r.model.n_line();
  const Eigen::Index dim = static_cast<Eigen::Index>(m) + 3;
  auto value = [&](const Vector& z) {
    return storage_U(r.model, GridState{z.head(static_cast<Eigen::Index>(m)), z.tail(3)}, r.state);
  };
  Vector z0(dim);
  z0 << r.ss.eta, r.state.omega_g;
  const double h = 1e-4;
  Matrix hess(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      Vector pp = z0, pm = z0, mp = z0, mm = z0;
      pp[i] += h, pp[j] += h;
      pm[i] += h, pm[j] -= h;
      mp[i] -= h, mp[j] += h;
      mm[i] -= h, mm[j] -= h;
      hess(i, j) = (value(pp) - value(pm) - value(mp) + value(mm)) / (4 * h * h);
    }
  }
  Matrix expected = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < m; ++k) {
    expected(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) =
        r.model.gamma()[static_cast<Eigen::Index>(k)] * std::cos(r.ss.eta[static_cast<Eigen::Index>(k)]);
  }
  for (Eigen::Index i = 0; i < 3; ++i) expected(static_cast<Eigen::Index>(m) + i, static_cast<Eigen::Index>(m) + i) = r.model.inertia()[i];
  EXPECT_LT((hess - expected).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(StorageZ, NonnegativeAndZeroAtReference) {
  const TurbineGovernor g1{1, 5.0, 0.0, 0.5, 0.1};
  const TurbineGovernor g2{2, 5.0, 4.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(storage_Z1(g1, 1.0, 1.0, 1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(storage_Z2(g2, 1.0, 1.0, 1.0, 1.0, 1.0), 0.0);
  // K = 2: 2 * 0.1 * 0.04 / 2 + 2 * 5 * 0.01 / 2
  EXPECT_NEAR(storage_Z1(g1, 1.1, 1.2, 1.0, 1.0), 0.004 + 0.05, 1e-15);
  EXPECT_NEAR(storage_Z2(g2, 1.1, 1.3, 0.8, 1.0, 1.0), 0.5 * (0.1 * 0.04 + 4.0 * (0.01 + 0.04)), 1e-15);
}

TEST(Calibration, CentralDifferenceConstant) {
  // Central-difference error of V = e^{-2t}/2 is dt^2 V'''/6, at most 2/3 dt^2.
  EXPECT_NEAR(calibrate_difference_constant(1e-3), 2.0 / 3.0, 5e-3);
}

TEST(Passivity, EqualityHoldsAndResidualIsSecondOrder) {
  Reference r;
  const auto a = passivity_probe(r.model, r.pm, case6::post_loads(), sinusoid, 20.0, 1e-3);
  const auto b = passivity_probe(r.model, r.pm, case6::post_loads(), sinusoid, 20.0, 5e-4);
  EXPECT_LE(a.max_residual, 1e-5);
  const double ratio = a.max_residual / b.max_residual;
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
}

TEST(Passivity, ZeroInputGivesDampingOnly) {
  Reference r;
  const auto p = passivity_probe(r.model, r.pm, case6::post_loads(),
                                 [](double) { return Vector::Zero(3); }, 1.0, 1e-3);
  for (double v : p.rhs) EXPECT_LE(v, 0.0);
  EXPECT_LT(p.max_residual, 1e-12);
}

TEST(Dissipation, EquilibriumTrajectoryIsFlat) {
  auto sc = case6::scenario();
  sc.events.clear();
  sc.integrator.horizon = 2.0;
  const ClosedLoopSystem sys(sc);
  const auto eq = equilibrium(sc, sc.initial_loads);
  const auto traj = simulate(sys);
  const auto rep = dissipation_check(traj, sys, eq);
  EXPECT_EQ(rep.V.size(), traj.rows());
  for (double v : rep.V) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_LT(std::abs(rep.max_rate), 1e-9);
  EXPECT_TRUE(rep.monotone);
  EXPECT_TRUE(std::isnan(rep.V_rate.front()));
  EXPECT_TRUE(std::isnan(rep.V_rate.back()));
  const auto m = run_metrics(traj, sys);
  ASSERT_TRUE(m.settling_time.has_value());
  EXPECT_DOUBLE_EQ(*m.settling_time, 0.0);
}

TEST(Dissipation, NominalRunIsMonotoneAndDecomposes) {
  const auto sc = case6::scenario();
  const ClosedLoopSystem sys(sc);
  const auto traj = simulate(sys);
  const auto rep = dissipation_check(traj, sys, equilibrium(sc, sc.final_loads()));
  EXPECT_LE(rep.max_rate, 1e-6);
  EXPECT_TRUE(rep.monotone);
  EXPECT_GT(rep.decomposition_samples, 60000u);
  EXPECT_LT(rep.max_decomposition_residual, 1e-8);
  EXPECT_GE(rep.min_V, 0.0);
}

TEST(Dissipation, DecomposesForOtherFamilies) {
  for (auto family : {ControllerFamily::primal_dual, ControllerFamily::none}) {
    auto sc = case6::scenario(family);
    sc.integrator.horizon = 30.0;
    const ClosedLoopSystem sys(sc);
    const auto traj = simulate(sys);
    const auto rep = dissipation_check(traj, sys, equilibrium(sc, sc.final_loads()));
    EXPECT_TRUE(rep.monotone) << to_string(family);
    EXPECT_LT(rep.max_decomposition_residual, 1e-8) << to_string(family);
  }
}

TEST(Dissipation, OverrideTermEntersDecomposition) {
  auto sc = case6::scenario(ControllerFamily::consensus, 2.0);
  sc.overrides = {{2, 5.0, 10.0}};
  sc.integrator.horizon = 30.0;
  const ClosedLoopSystem sys(sc);
  const auto traj = simulate(sys);
  const auto rep = dissipation_check(traj, sys, equilibrium(sc, sc.final_loads()));
  EXPECT_LT(rep.max_decomposition_residual, 1e-8);
  EXPECT_FALSE(rep.monotone);
  ASSERT_TRUE(rep.first_violation.has_value());
  EXPECT_GT(*rep.first_violation, 10.0);
}

TEST(Dissipation, RejectsNonSteadyReference) {
  const auto sc = case6::scenario();
  const ClosedLoopSystem sys(sc);
  auto eq = equilibrium(sc, sc.final_loads());
  eq.eta[0] += 0.1;
  auto short_sc = sc;
  short_sc.integrator.horizon = 10.0;
  const auto traj = simulate(ClosedLoopSystem(short_sc));
  EXPECT_THROW(dissipation_check(traj, sys, eq), ValidationError);
}

TEST(Metrics, NominalRun) {
  const auto sc = case6::scenario();
  const ClosedLoopSystem sys(sc);
  const auto m = run_metrics(simulate(sys), sys);
  EXPECT_FALSE(m.diverged);
  ASSERT_TRUE(m.settling_time.has_value());
  EXPECT_GT(*m.settling_time, 10.0);
  ASSERT_TRUE(m.terminal_dispatch_error.has_value());
  EXPECT_LE(*m.terminal_dispatch_error, 1e-3);
  EXPECT_LE(m.terminal_marginal_spread, 1e-4);
  EXPECT_EQ(m.security_violations, 0u);
}

TEST(Metrics, DivergedRunHasNoSettlingOrDispatchError) {
  auto sc = case6::scenario();
  sc.overrides = {{2, -400.0, 10.0}};
  sc.integrator.horizon = 60.0;
  const ClosedLoopSystem sys(sc);
  const auto m = run_metrics(simulate(sys), sys);
  EXPECT_TRUE(m.diverged);
  EXPECT_FALSE(m.settling_time.has_value());
  EXPECT_FALSE(m.terminal_dispatch_error.has_value());
}
