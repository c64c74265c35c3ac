#pragma once

// Lossless structure-preserving network model.
//
// Buses are indexed 0..n-1 with the n_g generator buses first and the n_l
// load buses after them. Lines are oriented: the `from` end carries +1 in
// the incidence matrix and the `to` end -1. The dynamic state is kept in
// line coordinates (eta = B^T delta); load-bus frequencies are algebraic.

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace olfc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct NetworkTopology {
  std::size_t n_gen = 0;
  std::size_t n_load = 0;
  std::vector<std::pair<std::size_t, std::size_t>> lines;  // (from, to)

  std::size_t n_bus() const { return n_gen + n_load; }
};

/// Connected components of an undirected graph, each sorted ascending.
std::vector<std::vector<std::size_t>> connected_components(
    std::size_t n_nodes,
    const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Oriented incidence matrix (n x m). Throws DisconnectedGraphError naming
/// the components when the topology does not connect every bus, and
/// ValidationError on out-of-range or self-loop lines.
Matrix build_incidence(const NetworkTopology& topology);

enum class BusKind { generator, load };

struct BusParams {
  BusKind kind = BusKind::load;
  double inertia = 0.0;  // M, generators only
  double damping = 0.0;  // D_g or D_l
  double voltage = 1.0;  // V
};

struct LineParams {
  std::size_t from = 0;
  std::size_t to = 0;
  double susceptance = 0.0;  // B_ij, either sign accepted
};

/// Immutable network description with cached incidence partitions and the
/// line couplings gamma_k = V_i V_j |B_ij|.
class NetworkModel {
 public:
  NetworkModel() = default;

  /// `buses` must list all generator buses before any load bus.
  NetworkModel(std::vector<BusParams> buses, std::vector<LineParams> lines);

  std::size_t n_gen() const { return n_gen_; }
  std::size_t n_load() const { return n_load_; }
  std::size_t n_bus() const { return n_gen_ + n_load_; }
  std::size_t n_line() const { return lines_.size(); }

  const std::vector<BusParams>& buses() const { return buses_; }
  const std::vector<LineParams>& lines() const { return lines_; }
  NetworkTopology topology() const;

  const Matrix& incidence() const { return incidence_; }
  const Matrix& incidence_gen() const { return incidence_gen_; }
  const Matrix& incidence_load() const { return incidence_load_; }
  const Vector& gamma() const { return gamma_; }
  const Vector& inertia() const { return inertia_; }
  const Vector& damping_gen() const { return damping_gen_; }
  const Vector& damping_load() const { return damping_load_; }

  /// Bus power injections B Gamma sin(eta), length n.
  Vector line_injections(const Vector& eta) const;

 private:
  std::vector<BusParams> buses_;
  std::vector<LineParams> lines_;
  std::size_t n_gen_ = 0;
  std::size_t n_load_ = 0;
  Matrix incidence_;
  Matrix incidence_gen_;
  Matrix incidence_load_;
  Vector gamma_;
  Vector inertia_;
  Vector damping_gen_;
  Vector damping_load_;
};

struct GridState {
  Vector eta;      // line angle differences (rad)
  Vector omega_g;  // generator frequency deviations (pu)
};

struct GridDerivative {
  Vector eta_dot;
  Vector omega_g_dot;
  Vector omega_l;  // algebraic load-bus frequencies used to form eta_dot
};

/// omega_l = D_l^{-1} (-B_l Gamma sin(eta) - P_l).
Vector derived_load_frequency(const NetworkModel& model, const Vector& eta,
                              const Vector& load);

/// Right-hand side of the omega_l-eliminated swing dynamics.
GridDerivative grid_rhs(const NetworkModel& model, const GridState& state,
                        const Vector& mechanical_power, const Vector& load);

/// Common steady-state frequency (1'P_m - 1'P_l) / (1'D_g 1 + 1'D_l 1).
double synchronous_frequency(const Vector& mechanical_power, const Vector& load,
                             const Vector& damping_gen,
                             const Vector& damping_load);

struct SteadyStateOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
};

struct SteadyState {
  Vector eta;               // in Im(B^T)
  double omega_star = 0.0;  // common frequency of every bus
  bool secure = false;      // all |eta_k| < pi/2
  double residual = 0.0;    // max-norm of the bus balance residual
  int iterations = 0;
};

/// Solves B Gamma sin(eta) = [P_m - D_g w*; -P_l - D_l w*] by damped Newton on
/// the bus angles (reference bus pinned at zero). Starts from eta = 0 and
/// retries from the DC linearization. Throws InfeasibleError if neither
/// start converges.
SteadyState solve_steady_state(const NetworkModel& model,
                               const Vector& mechanical_power,
                               const Vector& load,
                               const SteadyStateOptions& options = {});

/// True when every |eta_k| < pi/2.
bool is_secure(const Vector& eta);

}  // namespace olfc
