#include "olfc/actuation.hpp"

#include <algorithm>
#include <cmath>

#include "olfc/error.hpp"

namespace olfc {

void TurbineGovernor::validate() const {
  if (order != 1 && order != 2) throw ValidationError("turbine-governor order must be 1 or 2");
  if (!(turbine_time > 0.0)) throw ValidationError("T_m must be positive");
  if (order == 2 && !(governor_time > 0.0)) throw ValidationError("T_s must be positive");
  if (!(control_time > 0.0)) throw ValidationError("T_theta must be positive");
  if (!std::isfinite(droop_inverse)) throw ValidationError("K^-1 must be finite");
}

double tg1_rhs(double mechanical_power, double omega_g, double theta,
               const TurbineGovernor& unit) {
  return (-mechanical_power - unit.droop_inverse * omega_g + theta) /
         unit.turbine_time;
}

Tg2Derivative tg2_rhs(double steam_power, double mechanical_power,
                      double omega_g, double theta, const TurbineGovernor& unit) {
  return {(-steam_power - unit.droop_inverse * omega_g + theta) / unit.governor_time,
          (-mechanical_power + steam_power) / unit.turbine_time};
}

Eigen::Matrix3d assemble_W(double governor_time, double turbine_time,
                           double damping, double droop_inverse) {
  const double w12 = -0.5 * droop_inverse - 0.5;
  const double w13 = -0.5 * droop_inverse + 0.5;
  Eigen::Matrix3d w;
  w << -damping, w12, w13,
       w12, -governor_time / turbine_time, -0.5,
       w13, -0.5, -1.0;
  return w;
}

std::array<double, 3> symmetric_eigenvalues(const Eigen::Matrix3d& input) {
  Eigen::Matrix3d a = 0.5 * (input + input.transpose());
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    if (off <= 1e-300 || off <= 1e-34 * a.squaredNorm()) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        a(p, q) = a(q, p) = 0.0;
      }
    }
  }
  std::array<double, 3> ev{a(0, 0), a(1, 1), a(2, 2)};
  std::sort(ev.begin(), ev.end());
  return ev;
}

double droop_schur_complement(double governor_time, double turbine_time,
                              double damping, double droop_inverse) {
  const double tau = governor_time / turbine_time;
  const double x = droop_inverse;
  const double numerator = 0.25 * tau * x * x + (0.5 - 0.5 * tau) * x + 0.5 + 0.25 * tau;
  return -damping + numerator / (tau - 0.25);
}

DroopCertificate droop_certificate(double governor_time, double turbine_time,
                                   double damping, double droop_inverse) {
  if (!(governor_time > 0.0) || !(turbine_time > 0.0) || !(damping > 0.0)) {
    throw ValidationError("droop certificate needs positive T_s, T_m and D_g");
  }
  DroopCertificate cert;
  const double tau = governor_time / turbine_time;
  cert.governor_ratio = 4.0 * tau;
  cert.damping_ratio = damping * tau;
  cert.prerequisites_hold = cert.governor_ratio > 1.0 && cert.damping_ratio > 1.0;
  cert.alpha = (1.0 / (tau * tau)) * (cert.governor_ratio - 1.0) *
               (cert.damping_ratio - 1.0);
  cert.interval_nonempty = cert.prerequisites_hold && cert.alpha > 0.0;
  if (cert.interval_nonempty) {
    const double center = 1.0 - 1.0 / tau;
    const double radius = std::sqrt(cert.alpha);
    cert.lower = center - radius;
    cert.upper = center + radius;
    cert.inside_interval = cert.lower < droop_inverse && droop_inverse < cert.upper;
  }
  cert.W = assemble_W(governor_time, turbine_time, damping, droop_inverse);
  cert.W_eigenvalues = symmetric_eigenvalues(cert.W);
  cert.W_negdef = cert.W_eigenvalues[2] < -1e-12;
  return cert;
}

}  // namespace olfc
