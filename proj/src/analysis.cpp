#include "olfc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "olfc/error.hpp"

namespace olfc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double weighted_square(const Vector& v, const Vector& w) {
  return (v.array().square() * w.array()).sum();
}

// Grid residual of a candidate reference: bus balance with the load
// frequencies pinned at omega_star.
double reference_residual(const ClosedLoopSystem& system, const Equilibrium& ref) {
  const auto& model = system.scenario().network;
  const auto ng = static_cast<Eigen::Index>(model.n_gen());
  const auto nl = static_cast<Eigen::Index>(model.n_load());
  Vector network_load = ref.loads;
  const auto& cl = system.scenario().controllable_loads;
  for (std::size_t j = 0; j < cl.size(); ++j) {
    network_load[static_cast<Eigen::Index>(cl[j].load_index)] +=
        ref.theta_load[static_cast<Eigen::Index>(j)];
  }
  const Vector inj = model.line_injections(ref.eta);
  Vector r(ng + nl);
  r.head(ng) = ref.mechanical_power - model.damping_gen() * ref.omega_star - inj.head(ng);
  r.tail(nl) = -network_load - model.damping_load() * ref.omega_star - inj.tail(nl);
  return r.lpNorm<Eigen::Infinity>();
}

}  // namespace

double storage_U(const NetworkModel& model, const GridState& state,
                 const GridState& reference) {
  const Vector dw = state.omega_g - reference.omega_g;
  const Vector& g = model.gamma();
  const double kinetic = 0.5 * weighted_square(dw, model.inertia());
  const double potential =
      -(g.array() * state.eta.array().cos()).sum() +
      (g.array() * reference.eta.array().cos()).sum() -
      (g.array() * reference.eta.array().sin() * (state.eta - reference.eta).array()).sum();
  return kinetic + potential;
}

double storage_Z1(const TurbineGovernor& unit, double mechanical_power,
                  double theta, double mechanical_power_ref, double theta_ref) {
  const double k = 1.0 / unit.droop_inverse;
  const double dt = theta - theta_ref;
  const double dp = mechanical_power - mechanical_power_ref;
  return 0.5 * k * (unit.control_time * dt * dt + unit.turbine_time * dp * dp);
}

double storage_Z2(const TurbineGovernor& unit, double steam_power,
                  double mechanical_power, double theta, double power_ref,
                  double theta_ref) {
  const double dt = theta - theta_ref;
  const double ds = steam_power - power_ref;
  const double gap = mechanical_power - steam_power;
  return 0.5 * (unit.control_time * dt * dt +
                unit.governor_time * (ds * ds + gap * gap));
}

StorageBreakdown composite_storage(const ClosedLoopSystem& system, const Vector& x,
                                   const Equilibrium& ref) {
  const auto& sc = system.scenario();
  const auto& L = system.layout();
  StorageBreakdown s;
  s.U = storage_U(sc.network, GridState{segment(x, L.eta), segment(x, L.omega_g)},
                  GridState{ref.eta, ref.omega_g});
  if (sc.family != ControllerFamily::none) {
    const Vector pm = segment(x, L.mechanical_power);
    const Vector ps = system.steam_power_full(x);
    const Vector theta = segment(x, L.theta);
    for (std::size_t u = 0; u < sc.units.size(); ++u) {
      const auto i = static_cast<Eigen::Index>(u);
      const auto& gov = sc.units[u].governor;
      if (gov.order == 1) {
        s.Z1 += storage_Z1(gov, pm[i], theta[i], ref.mechanical_power[i], ref.theta[i]);
      } else {
        s.Z2 += storage_Z2(gov, ps[i], pm[i], theta[i], ref.mechanical_power[i], ref.theta[i]);
      }
    }
  }
  if (sc.family == ControllerFamily::primal_dual) {
    const auto& g = sc.primal_dual_gains;
    s.Z_dual = 0.5 / g.flow * (segment(x, L.flow) - ref.flow).squaredNorm() +
               0.5 / g.multiplier * (segment(x, L.lambda) - ref.lambda).squaredNorm();
  }
  const auto theta_l = segment(x, L.theta_load);
  for (std::size_t j = 0; j < sc.controllable_loads.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double d = theta_l[jj] - ref.theta_load[jj];
    s.Z_loads += 0.5 * sc.controllable_loads[j].control_time * d * d;
  }
  s.total = s.U + s.Z1 + s.Z2 + s.Z_dual + s.Z_loads;
  return s;
}

double composite_storage_rate(const ClosedLoopSystem& system, const Vector& x,
                              const ClosedLoopSystem::Segment& seg,
                              const Equilibrium& ref) {
  const auto& sc = system.scenario();
  const auto& model = sc.network;
  const auto& L = system.layout();
  const auto nl = static_cast<Eigen::Index>(model.n_load());

  const Vector dwg = segment(x, L.omega_g) - ref.omega_g;
  const Vector pl = seg.loads;
  const Vector dwl = system.load_frequency(x, pl) - ref.omega_l;
  double rate = -weighted_square(dwg, model.damping_gen()) -
                weighted_square(dwl, model.damping_load());
  // Uncontrollable load mismatch enters through the load buses.
  rate -= dwl.dot(pl - ref.loads);

  if (sc.family == ControllerFamily::none) {
    return rate + dwg.dot(Vector(segment(x, L.mechanical_power)) - ref.mechanical_power);
  }

  const Vector pm = segment(x, L.mechanical_power);
  const Vector ps = system.steam_power_full(x);
  const Vector theta = segment(x, L.theta);
  for (std::size_t u = 0; u < sc.units.size(); ++u) {
    const auto i = static_cast<Eigen::Index>(u);
    const auto& gov = sc.units[u].governor;
    if (gov.order == 1) {
      const double k = 1.0 / gov.droop_inverse;
      const double gap = theta[i] - pm[i];
      rate -= k * gap * gap;
    } else {
      const Eigen::Matrix3d W = assemble_W(gov.governor_time, gov.turbine_time,
                                           model.damping_gen()[i], gov.droop_inverse);
      const Eigen::Vector3d z(dwg[i], ps[i] - pm[i], ps[i] - theta[i]);
      // assemble_W carries -D on the diagonal; the damping is already counted.
      rate += z.dot(W * z) + model.damping_gen()[i] * dwg[i] * dwg[i];
      const double g = seg.gain[u];
      if (g != 1.0) {
        rate -= (g - 1.0) * (1.0 - gov.droop_inverse) * dwg[i] * (theta[i] - ref.theta[i]);
      }
    }
  }

  if (sc.family == ControllerFamily::consensus) {
    const Vector y = system.marginal_signal(x);
    Vector y_ref(y.size());
    y_ref.head(static_cast<Eigen::Index>(sc.units.size())) =
        marginal_costs(ref.theta, sc.costs());
    for (std::size_t j = 0; j < sc.controllable_loads.size(); ++j) {
      y_ref[static_cast<Eigen::Index>(sc.units.size() + j)] =
          sc.controllable_loads[j].benefit.marginal(ref.theta_load[static_cast<Eigen::Index>(j)]);
    }
    const Vector dy = y - y_ref;
    rate -= dy.dot(marginal_disagreement(sc.comm, dy));
  } else {
    for (std::size_t u = 0; u < sc.units.size(); ++u) {
      const auto i = static_cast<Eigen::Index>(u);
      const double d = theta[i] - ref.theta[i];
      rate -= sc.units[u].cost.q * d * d;
    }
    const Vector lambda = segment(x, L.lambda);
    rate += (lambda.tail(nl) - ref.lambda.tail(nl)).dot(pl - ref.loads);
  }
  return rate;
}

double calibrate_difference_constant(double dt) {
  const auto n = static_cast<std::size_t>(std::ceil(5.0 / dt));
  std::vector<double> x(n + 1);
  x[0] = 1.0;
  auto f = [](double, const Vector& s, Vector& ds) { ds = -s; };
  Vector s = Vector::Constant(1, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    s = rk4_step(f, static_cast<double>(k) * dt, s, dt);
    x[k + 1] = s[0];
  }
  double worst = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double fd = (0.5 * x[k + 1] * x[k + 1] - 0.5 * x[k - 1] * x[k - 1]) / (2.0 * dt);
    worst = std::max(worst, std::abs(fd + x[k] * x[k]));
  }
  return worst / (dt * dt);
}

StorageReport dissipation_check(const Trajectory& traj, const ClosedLoopSystem& system,
                                const Equilibrium& ref) {
  if (reference_residual(system, ref) > 1e-8) {
    throw ValidationError("reference is not a steady state of the network");
  }
  const auto& sc = system.scenario();
  const std::size_t n = traj.rows();
  StorageReport rep;
  rep.time = traj.time;
  rep.U.resize(n);
  rep.Z1.resize(n);
  rep.Z2.resize(n);
  rep.Z_dual.resize(n);
  rep.Z_loads.resize(n);
  rep.V.resize(n);
  rep.V_rate.assign(n, kNaN);
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = composite_storage(system, traj.state(k), ref);
    rep.U[k] = s.U;
    rep.Z1[k] = s.Z1;
    rep.Z2[k] = s.Z2;
    rep.Z_dual[k] = s.Z_dual;
    rep.Z_loads[k] = s.Z_loads;
    rep.V[k] = s.total;
  }
  rep.min_V = n > 0 ? *std::min_element(rep.V.begin(), rep.V.end()) : 0.0;

  const double dt = sc.integrator.dt;
  rep.tolerance = sc.analysis.dissipation_slack + calibrate_difference_constant(dt) * dt * dt;
  rep.max_rate = -std::numeric_limits<double>::infinity();
  const double last_break = system.breakpoints().empty() ? 0.0 : system.breakpoints().back();
  const bool exact_loads = !sc.load_perturbation && (sc.final_loads() - ref.loads).lpNorm<Eigen::Infinity>() == 0.0;

  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double h = traj.time[k + 1] - traj.time[k - 1];
    const double r = (rep.V[k + 1] - rep.V[k - 1]) / h;
    rep.V_rate[k] = r;
    rep.max_rate = std::max(rep.max_rate, r);
    if (r > rep.tolerance && !rep.first_violation) rep.first_violation = traj.time[k];
    // Five-point stencil here: the comparison is against an exact rate, so
    // the O(dt^2) error of the plain central difference would dominate.
    if (exact_loads && k >= 2 && k + 2 < n && traj.time[k - 2] > last_break + 1e-9) {
      const double fd4 = (rep.V[k - 2] - 8.0 * rep.V[k - 1] + 8.0 * rep.V[k + 1] - rep.V[k + 2]) /
                         (6.0 * h);
      const auto seg = system.segment_at(traj.time[k]);
      const double closed = composite_storage_rate(system, traj.state(k), seg, ref);
      rep.max_decomposition_residual =
          std::max(rep.max_decomposition_residual, std::abs(fd4 - closed));
      ++rep.decomposition_samples;
    }
  }
  if (n < 3) rep.max_rate = 0.0;
  rep.monotone = !rep.first_violation.has_value();
  return rep;
}

PassivityProbe passivity_probe(const NetworkModel& model, const Vector& pm_ref,
                               const Vector& load,
                               const std::function<Vector(double)>& input,
                               double horizon, double dt) {
  const auto ss = solve_steady_state(model, pm_ref, load);
  const GridState ref{ss.eta, Vector::Constant(static_cast<Eigen::Index>(model.n_gen()), ss.omega_star)};
  const auto m = static_cast<Eigen::Index>(model.n_line());
  const auto ng = static_cast<Eigen::Index>(model.n_gen());

  auto f = [&](double t, const Vector& s, Vector& ds) {
    const GridState gs{s.head(m), s.tail(ng)};
    const auto d = grid_rhs(model, gs, pm_ref + input(t), load);
    ds.resize(s.size());
    ds.head(m) = d.eta_dot;
    ds.tail(ng) = d.omega_g_dot;
  };

  const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  PassivityProbe probe;
  Vector s(m + ng);
  s.head(m) = ref.eta;
  s.tail(ng) = ref.omega_g;
  std::vector<Vector> states;
  states.reserve(steps + 1);
  states.push_back(s);
  for (std::size_t k = 0; k < steps; ++k) {
    s = rk4_step(f, static_cast<double>(k) * dt, s, dt);
    states.push_back(s);
  }

  const Vector wl_ref = Vector::Constant(static_cast<Eigen::Index>(model.n_load()), ss.omega_star);
  const std::size_t n = states.size();
  probe.time.resize(n);
  probe.storage.resize(n);
  probe.lhs.assign(n, kNaN);
  probe.rhs.resize(n);
  probe.residual.assign(n, kNaN);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const GridState gs{states[k].head(m), states[k].tail(ng)};
    probe.time[k] = t;
    probe.storage[k] = storage_U(model, gs, ref);
    const Vector dwg = gs.omega_g - ref.omega_g;
    const Vector dwl = derived_load_frequency(model, gs.eta, load) - wl_ref;
    probe.rhs[k] = -weighted_square(dwg, model.damping_gen()) -
                   weighted_square(dwl, model.damping_load()) + dwg.dot(input(t));
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    probe.lhs[k] = (probe.storage[k + 1] - probe.storage[k - 1]) / (2.0 * dt);
    probe.residual[k] = std::abs(probe.lhs[k] - probe.rhs[k]);
    probe.max_residual = std::max(probe.max_residual, probe.residual[k]);
  }
  return probe;
}

RunMetrics run_metrics(const Trajectory& traj, const ClosedLoopSystem& system) {
  const auto& sc = system.scenario();
  const auto& L = traj.layout;
  RunMetrics m;
  m.diverged = traj.diverged;
  m.divergence_time = traj.divergence_time;
  const std::size_t n = traj.rows();
  if (n == 0) return m;

  auto freq_norm = [&](std::size_t k) {
    const Vector x = traj.state(k);
    const Vector wl = system.load_frequency(x, traj.load(k));
    return std::max(Vector(segment(x, L.omega_g)).lpNorm<Eigen::Infinity>(),
                    wl.size() > 0 ? wl.lpNorm<Eigen::Infinity>() : 0.0);
  };

  for (std::size_t k = 0; k < n; ++k) {
    const Vector eta = segment(traj.state(k), L.eta);
    if (!is_secure(eta)) ++m.security_violations;
  }

  const Vector last = traj.state(n - 1);
  m.terminal_frequency = freq_norm(n - 1);
  const Vector y = system.marginal_signal(last);
  m.terminal_marginal_spread = y.size() > 0 ? y.maxCoeff() - y.minCoeff() : 0.0;
  if (traj.diverged) return m;

  const double last_event = sc.events.empty() ? 0.0 : sc.events.back().time;
  const double threshold = sc.analysis.settling_threshold;
  std::optional<double> settle;
  for (std::size_t k = n; k-- > 0;) {
    if (traj.time[k] < last_event - 1e-9) break;
    if (freq_norm(k) >= threshold) break;
    settle = traj.time[k];
  }
  m.settling_time = settle;

  if (sc.family != ControllerFamily::none) {
    const auto ref = equilibrium(sc, sc.final_loads());
    m.terminal_dispatch_error =
        (Vector(segment(last, L.mechanical_power)) - ref.mechanical_power).lpNorm<Eigen::Infinity>();
  }
  return m;
}

}  // namespace olfc
