#pragma once

// Distributed frequency controllers: marginal-cost consensus for first- and
// second-order turbine-governors, the gain-override variant, the primal-dual
// alternative, and the controllable-load controller.
//
// Communication is continuous and delay-free. Communication-graph nodes are
// the generator controllers (in generator order) followed by the controllable
// loads.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "olfc/actuation.hpp"
#include "olfc/dispatch.hpp"
#include "olfc/grid.hpp"

namespace olfc {

class CommGraph {
 public:
  CommGraph() = default;
  CommGraph(std::size_t n_nodes,
            std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t size() const { return neighbors_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
  bool connected() const;

 private:
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// Dense Laplacian of the communication graph. Throws DisconnectedGraphError
/// when the graph is not connected.
Matrix build_comm_laplacian(const CommGraph& comm);

/// Second-smallest Laplacian eigenvalue (zero iff disconnected).
double algebraic_connectivity(const CommGraph& comm);

/// (L y)_i = sum_{j in N_i} (y_i - y_j), by neighbor sums.
Vector marginal_disagreement(const CommGraph& comm, const Vector& signal);

/// T_theta dtheta/dt = -theta + P_m - K^{-1} q_i (L y)_i.
double consensus_rhs_order1(double theta, double mechanical_power,
                            double disagreement, double q,
                            const TurbineGovernor& unit);

/// T_theta dtheta/dt = -theta + P_s - g (1 - K^{-1}) omega_g - q_i (L y)_i,
/// with g = 1 for the nominal controller.
double consensus_rhs_order2(double theta, double steam_power, double omega_g,
                            double disagreement, double q,
                            const TurbineGovernor& unit,
                            double gain_multiplier = 1.0);

/// Stacked consensus terms -Q L (Q theta + R), the Laplacian form of the
/// communication terms (without the K^{-1} factor of first-order units).
Vector stacked_consensus_term(const CommGraph& comm,
                              std::span<const CostFunction> costs,
                              const Vector& theta);

struct PrimalDualGains {
  double flow = 1.0;        // k_v
  double multiplier = 1.0;  // k_lambda
};

struct PrimalDualDerivative {
  Vector theta_dot;   // n_g
  Vector flow_dot;    // m, virtual line flows v
  Vector lambda_dot;  // n, one multiplier per bus
};

/// Lagrangian saddle dynamics on the physical incidence matrix B:
///   theta: consensus term replaced by -(grad C_i(theta_i) - lambda_i),
///          scaled by K^{-1} for first-order units,
///   v'   = -k_v B^T lambda,
///   lambda' = k_lambda (B v - (theta; -P_l)).
/// `steam_power` entries are read only for second-order units.
PrimalDualDerivative primal_dual_rhs(const NetworkModel& model,
                                     std::span<const CostFunction> costs,
                                     std::span<const TurbineGovernor> units,
                                     const Vector& theta, const Vector& flow,
                                     const Vector& lambda,
                                     const Vector& mechanical_power,
                                     const Vector& steam_power,
                                     const Vector& omega_g, const Vector& load,
                                     const PrimalDualGains& gains = {});

/// Consensus signal of a controllable load: its marginal benefit r - q theta_l.
inline double load_marginal_signal(double theta_l, const BenefitFunction& b) {
  return b.marginal(theta_l);
}

/// T_theta dtheta_l/dt = omega_l + q_j (L y)_j, where y_j is the load's
/// marginal benefit and the neighbors' entries are their marginal costs or
/// benefits. The controllable load follows u_l = theta_l.
double load_controller_rhs(double omega_l, double disagreement,
                           const BenefitFunction& benefit, double control_time);

}  // namespace olfc
