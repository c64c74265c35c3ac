#pragma once

// Turbine-governor dynamics and the droop-constant certificate for the
// second-order model.

#include <array>

#include <Eigen/Dense>

namespace olfc {

/// Time constants in seconds. `droop_inverse` is K^{-1}; every equation uses
/// the inverse, so the gain K itself is never stored.
struct TurbineGovernor {
  int order = 2;               // 1 or 2
  double turbine_time = 1.0;   // T_m
  double governor_time = 1.0;  // T_s, second order only
  double droop_inverse = 0.0;  // K^{-1}
  double control_time = 0.1;   // T_theta

  /// Throws ValidationError on a non-positive time constant or bad order.
  void validate() const;
};

/// T_m dP_m/dt = -P_m - K^{-1} omega_g + theta.
double tg1_rhs(double mechanical_power, double omega_g, double theta,
               const TurbineGovernor& unit);

struct Tg2Derivative {
  double steam_power = 0.0;       // dP_s/dt
  double mechanical_power = 0.0;  // dP_m/dt
};

/// T_s dP_s/dt = -P_s - K^{-1} omega_g + theta,  T_m dP_m/dt = -P_m + P_s.
Tg2Derivative tg2_rhs(double steam_power, double mechanical_power,
                      double omega_g, double theta, const TurbineGovernor& unit);

/// The 3x3 matrix W of the quadratic form in (omega_g, P_s - P_m, P_s - theta)
/// that bounds the storage rate of generator + second-order governor +
/// controller.
Eigen::Matrix3d assemble_W(double governor_time, double turbine_time,
                           double damping, double droop_inverse);

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// ascending.
std::array<double, 3> symmetric_eigenvalues(const Eigen::Matrix3d& a);

/// Schur complement of the lower-right 2x2 block of W in closed form; a
/// quadratic in K^{-1} whose roots are the admissible-interval endpoints.
double droop_schur_complement(double governor_time, double turbine_time,
                              double damping, double droop_inverse);

struct DroopCertificate {
  double lower = 0.0;  // admissible K^{-1} interval, empty unless
  double upper = 0.0;  // prerequisites hold and alpha > 0
  double alpha = 0.0;
  double governor_ratio = 0.0;  // 4 T_s / T_m, must exceed 1
  double damping_ratio = 0.0;   // D_g T_s / T_m, must exceed 1
  bool prerequisites_hold = false;
  bool interval_nonempty = false;
  bool inside_interval = false;  // K^{-1} strictly inside
  Eigen::Matrix3d W = Eigen::Matrix3d::Zero();
  std::array<double, 3> W_eigenvalues{};
  bool W_negdef = false;  // all eigenvalues < -1e-12
};

DroopCertificate droop_certificate(double governor_time, double turbine_time,
                                   double damping, double droop_inverse);

}  // namespace olfc
