#include <random>

#include <gtest/gtest.h>

#include "case6.hpp"
#include "olfc/coordination.hpp"
#include "olfc/error.hpp"

using namespace olfc;

namespace {

Matrix dense_laplacian(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Matrix l = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (auto [a, b] : edges) {
    l(a, a) += 1, l(b, b) += 1, l(a, b) -= 1, l(b, a) -= 1;
  }
  return l;
}

}  // namespace

TEST(CommGraph, Validation) {
  EXPECT_THROW(CommGraph(3, {{0, 3}}), ValidationError);
  EXPECT_THROW(CommGraph(3, {{1, 1}}), ValidationError);
  EXPECT_THROW(CommGraph(3, {{0, 1}, {1, 0}}), ValidationError);
  EXPECT_FALSE(CommGraph(3, {{0, 1}}).connected());
  EXPECT_TRUE(CommGraph(3, {{0, 1}, {1, 2}}).connected());
}

TEST(CommGraph, LaplacianAndFiedlerValue) {
  const CommGraph path(3, {{0, 1}, {1, 2}});
  EXPECT_TRUE(build_comm_laplacian(path).isApprox(dense_laplacian(3, path.edges())));
  EXPECT_NEAR(algebraic_connectivity(path), 1.0, 1e-12);
  const CommGraph triangle(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_NEAR(algebraic_connectivity(triangle), 3.0, 1e-12);
  EXPECT_THROW(build_comm_laplacian(CommGraph(3, {{0, 1}})), DisconnectedGraphError);
}

TEST(Consensus, NeighborSumsEqualLaplacianProduct) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 4}};
  const CommGraph comm(5, edges);
  Vector y(5);
  for (auto& v : y) v = g(rng);
  EXPECT_LT((marginal_disagreement(comm, y) - dense_laplacian(5, edges) * y).norm(), 1e-14);
}

TEST(Consensus, StackedTermIsMinusQLQthetaPlusR) {
  const CommGraph comm(3, {{0, 1}, {1, 2}});
  const auto costs = case6::costs();
  const Vector theta = (Vector(3) << 0.7, 1.8, 1.1).finished();
  const Matrix q = Vector((Vector(3) << 2.4, 3.8, 3.4).finished()).asDiagonal();
  const Vector r = (Vector(3) << 10.5, 5.7, 8.9).finished();
  const Vector expected = -q * dense_laplacian(3, comm.edges()) * (q * theta + r);
  EXPECT_LT((stacked_consensus_term(comm, costs, theta) - expected).norm(), 1e-12);
}

TEST(Consensus, ControllerRhs) {
  TurbineGovernor g1{1, 5.0, 0.0, 0.5, 0.1};
  TurbineGovernor g2{2, 5.0, 4.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(consensus_rhs_order1(1.0, 1.2, 0.3, 2.0, g1), (-1.0 + 1.2 - 0.5 * 2.0 * 0.3) / 0.1);
  EXPECT_DOUBLE_EQ(consensus_rhs_order2(1.0, 1.1, 0.02, 0.3, 2.0, g2),
                   (-1.0 + 1.1 - 0.5 * 0.02 - 0.6) / 0.1);
  EXPECT_DOUBLE_EQ(consensus_rhs_order2(1.0, 1.1, 0.02, 0.3, 2.0, g2, 5.0),
                   (-1.0 + 1.1 - 5.0 * 0.5 * 0.02 - 0.6) / 0.1);
}

TEST(PrimalDual, StationaryAtOptimum) {
  const auto model = case6::network();
  const auto costs = case6::costs();
  std::vector<TurbineGovernor> units;
  for (int i = 0; i < 3; ++i) units.push_back({2, case6::kTm[i], case6::kTs[i], 0.5, 0.1});
  const Vector load = case6::post_loads();
  const auto d = optimal_dispatch(costs, load.sum());
  Vector inj(6);
  inj.head(3) = d.mechanical_power;
  inj.tail(3) = -load;
  const Vector flow = model.incidence().completeOrthogonalDecomposition().solve(inj);
  const Vector lambda = Vector::Constant(6, d.lambda);
  const auto r = primal_dual_rhs(model, costs, units, d.mechanical_power, flow, lambda,
                                 d.mechanical_power, d.mechanical_power, Vector::Zero(3), load);
  EXPECT_LT(r.theta_dot.lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_LT(r.flow_dot.lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT(r.lambda_dot.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(PrimalDual, GainsScaleDualDynamics) {
  const auto model = case6::network();
  const auto costs = case6::costs();
  std::vector<TurbineGovernor> units(3, TurbineGovernor{1, 5.0, 0.0, 0.5, 0.1});
  const Vector theta = Vector::Constant(3, 1.0), flow = Vector::Constant(11, 0.1);
  const Vector lambda = Vector::LinSpaced(6, 10.0, 12.0);
  const auto a = primal_dual_rhs(model, costs, units, theta, flow, lambda, theta, theta,
                                 Vector::Zero(3), case6::pre_loads(), {1.0, 1.0});
  const auto b = primal_dual_rhs(model, costs, units, theta, flow, lambda, theta, theta,
                                 Vector::Zero(3), case6::pre_loads(), {2.0, 3.0});
  EXPECT_TRUE(b.flow_dot.isApprox(2.0 * a.flow_dot));
  EXPECT_TRUE(b.lambda_dot.isApprox(3.0 * a.lambda_dot));
  EXPECT_TRUE(b.theta_dot.isApprox(a.theta_dot));
  // First-order units: (-theta + P_m - K^-1 (q theta + r - lambda)) / T_theta
  EXPECT_NEAR(a.theta_dot[0], (-1.0 + 1.0 - 0.5 * (2.4 + 10.5 - 10.0)) / 0.1, 1e-12);
}

TEST(LoadController, Rhs) {
  const BenefitFunction b{4.0, 13.0, 0.0};
  EXPECT_DOUBLE_EQ(load_marginal_signal(0.25, b), 12.0);
  EXPECT_DOUBLE_EQ(load_controller_rhs(-0.01, 0.2, b, 2.0), (-0.01 + 0.8) / 2.0);
}
