#pragma once

// Closed-loop system assembly and fixed-step integration.
//
// The stacked state is one contiguous vector; StateLayout names its slices.
// Integration is classical fourth-order Runge-Kutta on a uniform grid
// t_k = k dt. Load steps and controller overrides are breakpoints: a step that
// straddles one is split so the discontinuity lands exactly on a stage
// boundary, and a breakpoint that coincides with a grid point takes effect
// from that point on.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "olfc/actuation.hpp"
#include "olfc/coordination.hpp"
#include "olfc/dispatch.hpp"
#include "olfc/grid.hpp"

namespace olfc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ControllerFamily {
  none,         // open loop: P_m frozen at the initial optimal dispatch
  consensus,    // marginal-cost consensus (with optional gain overrides)
  primal_dual,  // Lagrangian saddle dynamics on the physical network
};

const char* to_string(ControllerFamily family);

struct GeneratorUnit {
  TurbineGovernor governor;
  CostFunction cost;
};

struct ControllableLoad {
  std::size_t load_index = 0;  // 0-based among load buses
  double control_time = 1.0;   // T_theta
  BenefitFunction benefit;
};

/// Replaces the frequency gain (1 - K^{-1}) of a second-order consensus
/// controller by g (1 - K^{-1}) from `active_from` on.
struct GainOverride {
  std::size_t unit = 0;
  double gain_multiplier = 1.0;
  double active_from = 0.0;
};

struct LoadEvent {
  double time = 0.0;
  Vector loads;
};

struct IntegratorSettings {
  double dt = 1e-3;
  double horizon = 80.0;
  double divergence_bound = 1e6;
};

struct AnalysisSettings {
  double settling_threshold = 1e-3;
  double dissipation_slack = 1e-6;
  double neighborhood_radius = 0.1;
};

/// Additive, bounded load disturbance P_l(t) += f(t), evaluated at every
/// Runge-Kutta stage.
using LoadPerturbation = std::function<Vector(double)>;

struct Scenario {
  std::string name;
  NetworkModel network;
  std::vector<GeneratorUnit> units;  // unit i drives generator bus i
  std::vector<ControllableLoad> controllable_loads;
  ControllerFamily family = ControllerFamily::consensus;
  CommGraph comm;
  std::vector<GainOverride> overrides;
  PrimalDualGains primal_dual_gains;
  Vector initial_loads;
  std::vector<LoadEvent> events;  // strictly increasing times
  IntegratorSettings integrator;
  AnalysisSettings analysis;
  double base_mva = 100.0;
  double frequency_base_hz = 50.0;
  LoadPerturbation load_perturbation;

  std::vector<CostFunction> costs() const;
  std::vector<TurbineGovernor> governors() const;
  std::vector<BenefitFunction> benefits() const;
  /// Scheduled loads in force at time t (right-continuous).
  const Vector& loads_at(double t) const;
  const Vector& final_loads() const;
  /// Throws ValidationError on inconsistent dimensions or settings.
  void validate() const;
};

struct Slice {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

struct StateLayout {
  Slice eta;
  Slice omega_g;
  Slice mechanical_power;
  Slice steam_power;  // second-order units only
  Slice theta;
  Slice flow;    // primal-dual virtual line flows v
  Slice lambda;  // primal-dual multipliers
  Slice theta_load;
  std::vector<Eigen::Index> steam_index;  // per unit, -1 for first order

  Eigen::Index size() const;
  std::vector<std::pair<std::string, Slice>> named() const;
  static StateLayout for_scenario(const Scenario& scenario);
};

template <typename V>
auto segment(V&& x, Slice s) {
  return x.segment(s.offset, s.length);
}

/// Closed-loop equilibrium for a given load vector.
struct Equilibrium {
  Vector loads;
  Vector eta;
  Vector omega_g;
  Vector omega_l;
  double omega_star = 0.0;
  Vector mechanical_power;
  Vector steam_power;  // full n_g vector, equal to P_m at equilibrium
  Vector theta;
  Vector flow;
  Vector lambda;
  Vector theta_load;
  double marginal = 0.0;  // common marginal cost (0 for the open loop)
  bool secure = false;
  double residual = 0.0;
};

Equilibrium equilibrium(const Scenario& scenario, const Vector& loads);

struct SystemState {
  StateLayout layout;
  Vector values;
};

class ClosedLoopSystem {
 public:
  explicit ClosedLoopSystem(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  const StateLayout& layout() const { return layout_; }

  /// Inputs frozen over one integration segment.
  struct Segment {
    Vector loads;
    std::vector<double> gain;  // per unit
  };
  Segment segment_at(double t) const;

  /// Load-event and override-activation times, ascending.
  const std::vector<double>& breakpoints() const { return breakpoints_; }

  void derivative(double t, const Vector& x, const Segment& segment,
                  Vector& dx) const;

  /// Effective uncontrollable load at time t (schedule + disturbance).
  Vector uncontrollable_load(double t, const Segment& segment) const;
  /// P_l + u_l seen by the network.
  Vector network_load(const Vector& x, const Vector& uncontrollable) const;
  Vector load_frequency(const Vector& x, const Vector& uncontrollable) const;
  /// Consensus signal: generator marginal costs (of theta, or of P_m in the
  /// open loop) followed by controllable-load marginal benefits.
  Vector marginal_signal(const Vector& x) const;
  Vector steam_power_full(const Vector& x) const;

  SystemState pack(const Equilibrium& eq) const;

 private:
  Scenario scenario_;
  StateLayout layout_;
  std::vector<double> breakpoints_;
  std::vector<CostFunction> costs_;
  std::vector<TurbineGovernor> governors_;
};

/// One classical RK4 step of size h for dx/dt = f(t, x).
template <typename F>
Vector rk4_step(F&& f, double t, const Vector& x, double h) {
  Vector k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size());
  f(t, x, k1);
  f(t + 0.5 * h, Vector(x + 0.5 * h * k1), k2);
  f(t + 0.5 * h, Vector(x + 0.5 * h * k2), k3);
  f(t + h, Vector(x + h * k3), k4);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Steady-state initial condition for the scenario's initial loads.
/// Throws InfeasibleError when that operating point has no steady state.
SystemState initialize(const Scenario& scenario);

/// Advances x from t to t + dt, splitting at interior breakpoints. Returns
/// false when the new state is non-finite or exceeds the divergence bound.
bool step(const ClosedLoopSystem& system, double t, double dt, Vector& x);

struct Trajectory {
  StateLayout layout;
  std::vector<double> time;
  RowMatrix states;  // one row per time sample
  RowMatrix loads;   // uncontrollable load per sample
  bool diverged = false;
  std::optional<double> divergence_time;

  std::size_t rows() const { return time.size(); }
  Vector state(std::size_t k) const { return states.row(static_cast<Eigen::Index>(k)).transpose(); }
  Vector load(std::size_t k) const { return loads.row(static_cast<Eigen::Index>(k)).transpose(); }
};

Trajectory simulate(const ClosedLoopSystem& system,
                    std::optional<Vector> initial_state = std::nullopt);
Trajectory simulate(const Scenario& scenario);

}  // namespace olfc
