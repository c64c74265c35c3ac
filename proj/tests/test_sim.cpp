#include <cmath>

#include <gtest/gtest.h>

#include "case6.hpp"
#include "olfc/error.hpp"
#include "olfc/sim.hpp"

using namespace olfc;

namespace {

double rk4_error(double dt) {
  // x' = A x with a lightly damped oscillator; exact solution by eigen-decomposition.
  Matrix a(2, 2);
  a << -0.1, 1.0, -1.0, -0.1;
  auto f = [&](double, const Vector& x, Vector& dx) { dx = a * x; };
  Vector x = (Vector(2) << 1.0, 0.0).finished();
  const double horizon = 2.0;
  const int n = static_cast<int>(std::lround(horizon / dt));
  for (int k = 0; k < n; ++k) x = rk4_step(f, k * dt, x, dt);
  const double decay = std::exp(-0.1 * horizon);
  const Vector exact = (Vector(2) << decay * std::cos(horizon), -decay * std::sin(horizon)).finished();
  return (x - exact).norm();
}

Scenario short_case(ControllerFamily family, double horizon = 12.0) {
  auto sc = case6::scenario(family);
  sc.integrator.horizon = horizon;
  if (horizon < sc.events.back().time) sc.events.clear();
  return sc;
}

}  // namespace

TEST(Rk4, FourthOrderConvergence) {
  const double e1 = rk4_error(0.1), e2 = rk4_error(0.05), e3 = rk4_error(0.025);
  EXPECT_GT(e1 / e2, 14.0);
  EXPECT_GT(e2 / e3, 14.0);
  EXPECT_LT(e2 / e3, 18.0);
}

TEST(Rk4, TwoPoleStepResponse) {
  // P_s, P_m response to a unit step in theta with omega = 0:
  // P_m(t) = 1 - (T_s e^{-t/T_s} - T_m e^{-t/T_m}) / (T_s - T_m).
  const TurbineGovernor u{2, 5.0, 4.0, 0.5, 0.1};
  auto f = [&](double, const Vector& x, Vector& dx) {
    const auto d = tg2_rhs(x[0], x[1], 0.0, 1.0, u);
    dx.resize(2);
    dx << d.steam_power, d.mechanical_power;
  };
  Vector x = Vector::Zero(2);
  const double dt = 0.01;
  for (int k = 0; k < 1000; ++k) x = rk4_step(f, k * dt, x, dt);
  const double t = 10.0;
  const double pm = 1.0 - (4.0 * std::exp(-t / 4.0) - 5.0 * std::exp(-t / 5.0)) / (4.0 - 5.0);
  EXPECT_NEAR(x[0], 1.0 - std::exp(-t / 4.0), 1e-10);
  EXPECT_NEAR(x[1], pm, 1e-10);
}

TEST(Layout, SlicesByFamily) {
  const auto c = StateLayout::for_scenario(case6::scenario());
  EXPECT_EQ(c.size(), 11 + 3 + 3 + 3 + 3);
  const auto n = StateLayout::for_scenario(case6::scenario(ControllerFamily::none));
  EXPECT_EQ(n.size(), 11 + 3 + 3);
  EXPECT_EQ(n.theta.length, 0);
  const auto p = StateLayout::for_scenario(case6::scenario(ControllerFamily::primal_dual));
  EXPECT_EQ(p.size(), 11 + 3 + 3 + 3 + 3 + 11 + 6);
}

TEST(Equilibrium, IsFixedPointForEveryFamily) {
  for (auto family : {ControllerFamily::none, ControllerFamily::consensus, ControllerFamily::primal_dual}) {
    const ClosedLoopSystem sys(case6::scenario(family));
    for (const Vector& loads : {case6::pre_loads(), case6::post_loads()}) {
      if (family == ControllerFamily::none && loads.isApprox(case6::post_loads())) continue;
      const auto eq = equilibrium(sys.scenario(), loads);
      const Vector x = sys.pack(eq).values;
      auto seg = sys.segment_at(0.0);
      seg.loads = loads;
      Vector dx;
      sys.derivative(0.0, x, seg, dx);
      EXPECT_LT(dx.lpNorm<Eigen::Infinity>(), 1e-9) << to_string(family);
    }
  }
}

TEST(Equilibrium, ConsensusOptimumHasZeroFrequency) {
  const auto eq = equilibrium(case6::scenario(), case6::post_loads());
  EXPECT_NEAR(eq.omega_star, 0.0, 1e-14);
  EXPECT_NEAR(eq.marginal, 12.42645, 1e-5);
  EXPECT_TRUE(eq.secure);
}

TEST(Simulate, RowCountAndRest) {
  const auto traj = simulate(short_case(ControllerFamily::consensus, 5.0));
  EXPECT_EQ(traj.rows(), 5001u);
  EXPECT_FALSE(traj.diverged);
  EXPECT_DOUBLE_EQ(traj.time.back(), 5.0);
  // No event before t = 10: the initial equilibrium is kept.
  EXPECT_LT((traj.state(5000) - traj.state(0)).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Simulate, LoadScheduleIsRightContinuous) {
  const auto traj = simulate(short_case(ControllerFamily::consensus));
  EXPECT_NEAR(traj.load(9999)[0], 1.01, 0.0);
  EXPECT_NEAR(traj.load(10000)[0], 1.15, 0.0);
}

TEST(Simulate, OffGridBreakpointMatchesFineReference) {
  auto sc = short_case(ControllerFamily::consensus, 10.5);
  sc.events[0].time = 10.0005;
  sc.integrator.dt = 0.002;
  const auto coarse = simulate(sc);
  sc.integrator.dt = 0.0005;  // the event now lands on the grid
  const auto fine = simulate(sc);
  const double err = (coarse.state(coarse.rows() - 1) - fine.state(fine.rows() - 1)).lpNorm<Eigen::Infinity>();
  EXPECT_LT(err, 1e-6);
}

TEST(Simulate, Deterministic) {
  const auto a = simulate(short_case(ControllerFamily::consensus));
  const auto b = simulate(short_case(ControllerFamily::consensus));
  EXPECT_EQ((a.states - b.states).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulate, DivergenceTruncates) {
  auto sc = short_case(ControllerFamily::consensus, 60.0);
  sc.overrides = {{2, -400.0, 10.0}};
  const auto traj = simulate(sc);
  ASSERT_TRUE(traj.diverged);
  ASSERT_TRUE(traj.divergence_time.has_value());
  EXPECT_GT(*traj.divergence_time, 10.0);
  EXPECT_EQ(traj.rows(), static_cast<std::size_t>(traj.states.rows()));
  EXPECT_DOUBLE_EQ(traj.time.back(), *traj.divergence_time);
  const Vector last = traj.state(traj.rows() - 1);
  EXPECT_TRUE(!last.allFinite() || last.lpNorm<Eigen::Infinity>() > sc.integrator.divergence_bound);
  EXPECT_LE(traj.state(traj.rows() - 2).lpNorm<Eigen::Infinity>(), sc.integrator.divergence_bound);
}

TEST(Simulate, OverrideSwitchesAtActivation) {
  auto sc = case6::scenario();
  sc.overrides = {{2, 5.0, 10.0}};
  const ClosedLoopSystem sys(sc);
  EXPECT_DOUBLE_EQ(sys.segment_at(9.999).gain[2], 1.0);
  EXPECT_DOUBLE_EQ(sys.segment_at(10.0).gain[2], 5.0);
  ASSERT_EQ(sys.breakpoints().size(), 1u);
}

TEST(Scenario, ValidationErrors) {
  auto sc = case6::scenario();
  sc.events[0].time = 90.0;
  EXPECT_THROW(ClosedLoopSystem{sc}, ValidationError);
  sc = case6::scenario();
  sc.comm = CommGraph(3, {{0, 1}});
  EXPECT_THROW(ClosedLoopSystem{sc}, DisconnectedGraphError);
  sc = case6::scenario();
  sc.initial_loads = Vector::Zero(2);
  EXPECT_THROW(ClosedLoopSystem{sc}, ValidationError);
  sc = case6::scenario(ControllerFamily::none);
  sc.overrides = {{0, 5.0, 1.0}};
  EXPECT_THROW(ClosedLoopSystem{sc}, ValidationError);
}

TEST(Simulate, PerturbationIsApplied) {
  auto sc = short_case(ControllerFamily::consensus, 1.0);
  sc.load_perturbation = [](double t) { return Vector::Constant(3, 0.01 * std::sin(t)); };
  const auto traj = simulate(sc);
  EXPECT_NEAR(traj.load(500)[1], 1.20 + 0.01 * std::sin(0.5), 1e-15);
  EXPECT_GT(std::abs(traj.states(500, 11)), 0.0);
}
