#pragma once

// Numerical checks of the stability certificates along simulated
// trajectories: incremental storage functions, the composite Lyapunov rate,
// the open-loop passivity equality, and summary metrics.
//
// Storage rates are estimated by central differences of the stored
// trajectory, never through the right-hand side, so the checks stay
// independent of the dynamics they certify.

#include <functional>
#include <optional>
#include <vector>

#include "olfc/sim.hpp"

namespace olfc {

/// Bregman-distance storage of the network:
///   (w - wb)' M (w - wb) / 2 - 1' Gamma cos(eta) + 1' Gamma cos(etab)
///   - (Gamma sin(etab))' (eta - etab).
double storage_U(const NetworkModel& model, const GridState& state,
                 const GridState& reference);

/// First-order governor + controller: K T_theta (theta - thb)^2 / 2 +
/// K T_m (P_m - Pb)^2 / 2, with K = 1 / K^{-1}.
double storage_Z1(const TurbineGovernor& unit, double mechanical_power,
                  double theta, double mechanical_power_ref, double theta_ref);

/// Second-order governor + controller: T_theta (theta - thb)^2 / 2 +
/// T_s (P_s - Pb)^2 / 2 + T_s (P_m - P_s)^2 / 2.
double storage_Z2(const TurbineGovernor& unit, double steam_power,
                  double mechanical_power, double theta, double power_ref,
                  double theta_ref);

struct StorageBreakdown {
  double U = 0.0;
  double Z1 = 0.0;        // sum over first-order units
  double Z2 = 0.0;        // sum over second-order units
  double Z_dual = 0.0;    // primal-dual flows and multipliers
  double Z_loads = 0.0;   // controllable-load controllers
  double total = 0.0;
};

StorageBreakdown composite_storage(const ClosedLoopSystem& system,
                                   const Vector& x, const Equilibrium& reference);

/// Closed-form value of the composite storage rate at state x, valid while
/// the loads equal the reference loads and no disturbance acts: damping
/// terms, -K (theta - P_m)^2 for first-order units, the W quadratic forms for
/// second-order units, the communication term, and the extra override term
/// -(g - 1)(1 - K^{-1}) omega_g (theta - thb) when a gain override is active.
double composite_storage_rate(const ClosedLoopSystem& system, const Vector& x,
                              const ClosedLoopSystem::Segment& segment,
                              const Equilibrium& reference);

/// Tolerance constant C of slack + C dt^2: the worst central-difference error
/// on V = x^2 / 2 along RK4 solutions of x' = -x, divided by dt^2.
double calibrate_difference_constant(double dt);

struct StorageReport {
  std::vector<double> time;
  std::vector<double> U;
  std::vector<double> Z1;
  std::vector<double> Z2;
  std::vector<double> Z_dual;
  std::vector<double> Z_loads;
  std::vector<double> V;
  std::vector<double> V_rate;  // central differences, NaN at both ends
  double tolerance = 0.0;      // slack + C dt^2
  double max_rate = 0.0;       // max interior V_rate
  std::optional<double> first_violation;  // first t with V_rate > tolerance
  bool monotone = true;                   // no violation
  double min_V = 0.0;
  double max_decomposition_residual = 0.0;  // five-point rate vs closed form
  std::size_t decomposition_samples = 0;
};

/// Evaluates V = U + sum Z along the trajectory, its central-difference rate,
/// and the closed-form decomposition on the samples after the last
/// breakpoint. Throws ValidationError if `reference` is not a steady state
/// (grid residual above 1e-8).
StorageReport dissipation_check(const Trajectory& trajectory,
                                const ClosedLoopSystem& system,
                                const Equilibrium& reference);

struct PassivityProbe {
  std::vector<double> time;
  std::vector<double> storage;   // U
  std::vector<double> lhs;       // central-difference dU/dt
  std::vector<double> rhs;       // -|w_g - wb|^2_Dg - |w_l - wb|^2_Dl + (w_g - wb)'(P_m - Pb)
  std::vector<double> residual;  // |lhs - rhs|, interior samples only
  double max_residual = 0.0;
};

/// Open-loop network driven by P_m(t) = P_m_ref + input(t) from the steady
/// state of (P_m_ref, load); checks the storage rate equality.
PassivityProbe passivity_probe(const NetworkModel& model,
                               const Vector& mechanical_power_ref,
                               const Vector& load,
                               const std::function<Vector(double)>& input,
                               double horizon, double dt);

struct RunMetrics {
  std::optional<double> settling_time;
  double terminal_frequency = 0.0;  // |omega|_inf at the last sample
  double terminal_marginal_spread = 0.0;
  std::optional<double> terminal_dispatch_error;
  bool diverged = false;
  std::optional<double> divergence_time;
  std::size_t security_violations = 0;  // samples with some |eta_k| >= pi/2
};

/// Settling time is the first t after the last load event from which
/// |omega|_inf stays below the threshold until the horizon.
RunMetrics run_metrics(const Trajectory& trajectory, const ClosedLoopSystem& system);

}  // namespace olfc
