#include "olfc/coordination.hpp"

#include <Eigen/Eigenvalues>

#include "olfc/error.hpp"

namespace olfc {

CommGraph::CommGraph(std::size_t n_nodes,
                     std::vector<std::pair<std::size_t, std::size_t>> edges)
    : edges_(std::move(edges)), neighbors_(n_nodes) {
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto [a, b] = edges_[k];
    if (a >= n_nodes || b >= n_nodes) {
      throw ValidationError("communication edge " + std::to_string(k + 1) +
                            " references a controller outside 1.." +
                            std::to_string(n_nodes));
    }
    if (a == b) {
      throw ValidationError("communication edge " + std::to_string(k + 1) +
                            " is a self-loop");
    }
    for (std::size_t j : neighbors_[a]) {
      if (j == b) {
        throw ValidationError("communication edge " + std::to_string(k + 1) +
                              " duplicates an earlier edge");
      }
    }
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
}

bool CommGraph::connected() const {
  return size() <= 1 || connected_components(size(), edges_).size() == 1;
}

Matrix build_comm_laplacian(const CommGraph& comm) {
  const auto n = static_cast<Eigen::Index>(comm.size());
  Matrix lap = Matrix::Zero(n, n);
  for (const auto& [a, b] : comm.edges()) {
    const auto i = static_cast<Eigen::Index>(a);
    const auto j = static_cast<Eigen::Index>(b);
    lap(i, i) += 1.0;
    lap(j, j) += 1.0;
    lap(i, j) -= 1.0;
    lap(j, i) -= 1.0;
  }
  if (!comm.connected()) {
    const auto parts = connected_components(comm.size(), comm.edges());
    throw DisconnectedGraphError("communication graph is disconnected (" +
                                 std::to_string(parts.size()) + " components)");
  }
  if (n > 1 && algebraic_connectivity(comm) <= 1e-9) {
    throw DisconnectedGraphError("communication graph has vanishing algebraic connectivity");
  }
  return lap;
}

double algebraic_connectivity(const CommGraph& comm) {
  const auto n = static_cast<Eigen::Index>(comm.size());
  if (n < 2) return 0.0;
  Matrix lap = Matrix::Zero(n, n);
  for (const auto& [a, b] : comm.edges()) {
    const auto i = static_cast<Eigen::Index>(a);
    const auto j = static_cast<Eigen::Index>(b);
    lap(i, i) += 1.0;
    lap(j, j) += 1.0;
    lap(i, j) -= 1.0;
    lap(j, i) -= 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(lap, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()[1];
}

Vector marginal_disagreement(const CommGraph& comm, const Vector& signal) {
  Vector out = Vector::Zero(signal.size());
  for (std::size_t i = 0; i < comm.size(); ++i) {
    double acc = 0.0;
    const double yi = signal[static_cast<Eigen::Index>(i)];
    for (std::size_t j : comm.neighbors(i)) acc += yi - signal[static_cast<Eigen::Index>(j)];
    out[static_cast<Eigen::Index>(i)] = acc;
  }
  return out;
}

double consensus_rhs_order1(double theta, double mechanical_power,
                            double disagreement, double q,
                            const TurbineGovernor& unit) {
  return (-theta + mechanical_power - unit.droop_inverse * q * disagreement) /
         unit.control_time;
}

double consensus_rhs_order2(double theta, double steam_power, double omega_g,
                            double disagreement, double q,
                            const TurbineGovernor& unit, double gain_multiplier) {
  return (-theta + steam_power -
          gain_multiplier * (1.0 - unit.droop_inverse) * omega_g -
          q * disagreement) /
         unit.control_time;
}

Vector stacked_consensus_term(const CommGraph& comm,
                              std::span<const CostFunction> costs,
                              const Vector& theta) {
  const Vector y = marginal_costs(theta, costs);
  Vector out = marginal_disagreement(comm, y);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] *= -costs[static_cast<std::size_t>(i)].q;
  }
  return out;
}

PrimalDualDerivative primal_dual_rhs(const NetworkModel& model,
                                     std::span<const CostFunction> costs,
                                     std::span<const TurbineGovernor> units,
                                     const Vector& theta, const Vector& flow,
                                     const Vector& lambda,
                                     const Vector& mechanical_power,
                                     const Vector& steam_power,
                                     const Vector& omega_g, const Vector& load,
                                     const PrimalDualGains& gains) {
  const auto ng = static_cast<Eigen::Index>(model.n_gen());
  PrimalDualDerivative d;
  d.theta_dot.resize(ng);
  for (Eigen::Index i = 0; i < ng; ++i) {
    const auto& unit = units[static_cast<std::size_t>(i)];
    const double gradient_gap = costs[static_cast<std::size_t>(i)].marginal(theta[i]) - lambda[i];
    if (unit.order == 1) {
      d.theta_dot[i] = (-theta[i] + mechanical_power[i] -
                        unit.droop_inverse * gradient_gap) /
                       unit.control_time;
    } else {
      d.theta_dot[i] = (-theta[i] + steam_power[i] -
                        (1.0 - unit.droop_inverse) * omega_g[i] - gradient_gap) /
                       unit.control_time;
    }
  }
  const Matrix& b = model.incidence();
  d.flow_dot = -gains.flow * (b.transpose() * lambda);
  Vector injection(b.rows());
  injection.head(ng) = theta;
  injection.tail(static_cast<Eigen::Index>(model.n_load())) = -load;
  d.lambda_dot = gains.multiplier * (b * flow - injection);
  return d;
}

double load_controller_rhs(double omega_l, double disagreement,
                           const BenefitFunction& benefit, double control_time) {
  return (omega_l + benefit.q * disagreement) / control_time;
}

}  // namespace olfc
