#include "olfc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/QR>

#include "olfc/error.hpp"

namespace olfc {

namespace {

// Two times closer than this are the same instant.
constexpr double kTimeEps = 1e-9;

}  // namespace

const char* to_string(ControllerFamily family) {
  switch (family) {
    case ControllerFamily::none: return "none";
    case ControllerFamily::consensus: return "consensus";
    case ControllerFamily::primal_dual: return "primal_dual";
  }
  return "unknown";
}

std::vector<CostFunction> Scenario::costs() const {
  std::vector<CostFunction> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(u.cost);
  return out;
}

std::vector<TurbineGovernor> Scenario::governors() const {
  std::vector<TurbineGovernor> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(u.governor);
  return out;
}

std::vector<BenefitFunction> Scenario::benefits() const {
  std::vector<BenefitFunction> out;
  out.reserve(controllable_loads.size());
  for (const auto& c : controllable_loads) out.push_back(c.benefit);
  return out;
}

const Vector& Scenario::loads_at(double t) const {
  const Vector* current = &initial_loads;
  for (const auto& e : events) {
    if (e.time <= t + kTimeEps) current = &e.loads;
  }
  return *current;
}

const Vector& Scenario::final_loads() const {
  return events.empty() ? initial_loads : events.back().loads;
}

void Scenario::validate() const {
  const auto ng = network.n_gen();
  const auto nl = static_cast<Eigen::Index>(network.n_load());
  if (ng == 0) throw ValidationError("scenario needs at least one generator bus", "network.buses");
  if (units.size() != ng) {
    throw ValidationError("expected one unit per generator bus (" + std::to_string(ng) +
                              "), got " + std::to_string(units.size()),
                          "units");
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::string path = "units[" + std::to_string(i) + "]";
    try {
      units[i].governor.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), path);
    }
    if (!(units[i].cost.q > 0.0)) throw ValidationError("cost q must be positive", path + ".cost.q");
    if (family != ControllerFamily::none && units[i].governor.order == 1 &&
        !(units[i].governor.droop_inverse > 0.0)) {
      throw ValidationError("first-order units need K^-1 > 0", path);
    }
  }
  if (initial_loads.size() != nl) {
    throw ValidationError("expected " + std::to_string(nl) + " load values",
                          "schedule.initial_loads");
  }
  double last = 0.0;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const std::string path = "schedule.events[" + std::to_string(k) + "]";
    if (!(events[k].time > last)) {
      throw ValidationError("event times must be positive and strictly increasing", path + ".time");
    }
    if (events[k].loads.size() != nl) {
      throw ValidationError("expected " + std::to_string(nl) + " load values", path + ".loads");
    }
    last = events[k].time;
  }
  if (!(integrator.dt > 0.0)) throw ValidationError("dt must be positive", "integrator.dt");
  if (!(integrator.horizon >= 0.0)) throw ValidationError("horizon must be nonnegative", "integrator.horizon");
  if (!events.empty() && integrator.horizon < events.back().time) {
    throw ValidationError("horizon ends before the last load event", "integrator.horizon");
  }
  if (!(integrator.divergence_bound > 0.0)) {
    throw ValidationError("divergence bound must be positive", "integrator.divergence_bound");
  }

  std::set<std::size_t> seen;
  for (std::size_t j = 0; j < controllable_loads.size(); ++j) {
    const auto& c = controllable_loads[j];
    const std::string path = "controllable_loads[" + std::to_string(j) + "]";
    if (c.load_index >= network.n_load()) throw ValidationError("not a load bus", path + ".bus");
    if (!seen.insert(c.load_index).second) throw ValidationError("load bus listed twice", path + ".bus");
    if (!(c.control_time > 0.0)) throw ValidationError("T_theta must be positive", path + ".T_theta");
    if (!(c.benefit.q > 0.0)) throw ValidationError("benefit q must be positive", path + ".benefit.q");
  }
  if (!controllable_loads.empty() && family != ControllerFamily::consensus) {
    throw ValidationError("controllable loads require the consensus family", "controllers.family");
  }
  if (family == ControllerFamily::consensus) {
    const std::size_t nodes = ng + controllable_loads.size();
    if (comm.size() != nodes) {
      throw ValidationError("communication graph must have " + std::to_string(nodes) + " nodes",
                            "controllers.comm_edges");
    }
    if (!comm.connected()) {
      throw DisconnectedGraphError("communication graph is not connected", "controllers.comm_edges");
    }
  }
  for (std::size_t k = 0; k < overrides.size(); ++k) {
    const std::string path = "controllers.overrides[" + std::to_string(k) + "]";
    if (family != ControllerFamily::consensus) {
      throw ValidationError("gain overrides apply to the consensus family only", path);
    }
    if (overrides[k].unit >= units.size()) throw ValidationError("unknown unit", path + ".unit");
    if (units[overrides[k].unit].governor.order != 2) {
      throw ValidationError("gain overrides apply to second-order units only", path + ".unit");
    }
    if (!std::isfinite(overrides[k].gain_multiplier)) {
      throw ValidationError("gain multiplier must be finite", path + ".gain_multiplier");
    }
  }
  if (family == ControllerFamily::primal_dual &&
      (!(primal_dual_gains.flow > 0.0) || !(primal_dual_gains.multiplier > 0.0))) {
    throw ValidationError("primal-dual gains must be positive", "controllers.primal_dual_gains");
  }
}

Eigen::Index StateLayout::size() const {
  Eigen::Index end = 0;
  for (const auto& [name, s] : named()) end = std::max(end, s.offset + s.length);
  return end;
}

std::vector<std::pair<std::string, Slice>> StateLayout::named() const {
  return {{"eta", eta},     {"omega_g", omega_g}, {"P_m", mechanical_power},
          {"P_s", steam_power}, {"theta", theta}, {"v", flow},
          {"lambda", lambda}, {"theta_l", theta_load}};
}

StateLayout StateLayout::for_scenario(const Scenario& scenario) {
  const auto m = static_cast<Eigen::Index>(scenario.network.n_line());
  const auto n = static_cast<Eigen::Index>(scenario.network.n_bus());
  const auto ng = static_cast<Eigen::Index>(scenario.network.n_gen());
  StateLayout layout;
  Eigen::Index offset = 0;
  auto take = [&](Eigen::Index len) {
    Slice s{offset, len};
    offset += len;
    return s;
  };
  layout.eta = take(m);
  layout.omega_g = take(ng);
  layout.mechanical_power = take(ng);
  layout.steam_index.assign(scenario.units.size(), -1);
  Eigen::Index n_steam = 0;
  if (scenario.family != ControllerFamily::none) {
    for (std::size_t i = 0; i < scenario.units.size(); ++i) {
      if (scenario.units[i].governor.order == 2) layout.steam_index[i] = n_steam++;
    }
  }
  layout.steam_power = take(n_steam);
  layout.theta = take(scenario.family == ControllerFamily::none ? 0 : ng);
  const bool pd = scenario.family == ControllerFamily::primal_dual;
  layout.flow = take(pd ? m : 0);
  layout.lambda = take(pd ? n : 0);
  layout.theta_load = take(static_cast<Eigen::Index>(scenario.controllable_loads.size()));
  return layout;
}

Equilibrium equilibrium(const Scenario& scenario, const Vector& loads) {
  const auto& model = scenario.network;
  const auto ng = static_cast<Eigen::Index>(model.n_gen());
  const auto costs = scenario.costs();
  Equilibrium eq;
  eq.loads = loads;
  Vector network_load = loads;
  eq.theta_load.resize(0);

  if (scenario.family == ControllerFamily::none) {
    const auto d = optimal_dispatch(costs, scenario.initial_loads.sum());
    eq.mechanical_power = d.mechanical_power;
  } else if (!scenario.controllable_loads.empty()) {
    const auto w = social_welfare_dispatch(costs, scenario.benefits(), loads.sum());
    eq.mechanical_power = w.mechanical_power;
    eq.theta_load = w.controllable_load;
    eq.marginal = w.lambda;
    for (std::size_t j = 0; j < scenario.controllable_loads.size(); ++j) {
      network_load[static_cast<Eigen::Index>(scenario.controllable_loads[j].load_index)] +=
          w.controllable_load[static_cast<Eigen::Index>(j)];
    }
  } else {
    const auto d = optimal_dispatch(costs, loads.sum());
    eq.mechanical_power = d.mechanical_power;
    eq.marginal = d.lambda;
  }

  const auto ss = solve_steady_state(model, eq.mechanical_power, network_load);
  eq.eta = ss.eta;
  eq.omega_star = ss.omega_star;
  eq.omega_g = Vector::Constant(ng, ss.omega_star);
  eq.omega_l = Vector::Constant(static_cast<Eigen::Index>(model.n_load()), ss.omega_star);
  eq.secure = ss.secure;
  eq.residual = ss.residual;
  eq.steam_power = eq.mechanical_power;
  eq.theta = eq.mechanical_power;

  if (scenario.family == ControllerFamily::primal_dual) {
    const auto n = static_cast<Eigen::Index>(model.n_bus());
    eq.lambda = Vector::Constant(n, eq.marginal);
    Vector injection(n);
    injection.head(ng) = eq.theta;
    injection.tail(n - ng) = -loads;
    // Minimum-norm virtual flows; any cycle component is also an equilibrium.
    eq.flow = model.incidence().completeOrthogonalDecomposition().solve(injection);
  }
  return eq;
}

ClosedLoopSystem::ClosedLoopSystem(Scenario scenario)
    : scenario_(std::move(scenario)) {
  scenario_.validate();
  layout_ = StateLayout::for_scenario(scenario_);
  costs_ = scenario_.costs();
  governors_ = scenario_.governors();
  std::vector<double> times;
  for (const auto& e : scenario_.events) times.push_back(e.time);
  for (const auto& o : scenario_.overrides) {
    if (o.active_from > 0.0) times.push_back(o.active_from);
  }
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (breakpoints_.empty() || t - breakpoints_.back() > kTimeEps) breakpoints_.push_back(t);
  }
}

ClosedLoopSystem::Segment ClosedLoopSystem::segment_at(double t) const {
  Segment seg;
  seg.loads = scenario_.loads_at(t);
  seg.gain.assign(scenario_.units.size(), 1.0);
  for (const auto& o : scenario_.overrides) {
    if (o.active_from <= t + kTimeEps) seg.gain[o.unit] = o.gain_multiplier;
  }
  return seg;
}

Vector ClosedLoopSystem::uncontrollable_load(double t, const Segment& segment) const {
  if (!scenario_.load_perturbation) return segment.loads;
  return segment.loads + scenario_.load_perturbation(t);
}

Vector ClosedLoopSystem::network_load(const Vector& x, const Vector& uncontrollable) const {
  Vector load = uncontrollable;
  const auto theta_l = segment(x, layout_.theta_load);
  for (std::size_t j = 0; j < scenario_.controllable_loads.size(); ++j) {
    load[static_cast<Eigen::Index>(scenario_.controllable_loads[j].load_index)] +=
        theta_l[static_cast<Eigen::Index>(j)];
  }
  return load;
}

Vector ClosedLoopSystem::load_frequency(const Vector& x, const Vector& uncontrollable) const {
  return derived_load_frequency(scenario_.network, segment(x, layout_.eta),
                                network_load(x, uncontrollable));
}

Vector ClosedLoopSystem::marginal_signal(const Vector& x) const {
  const auto ng = static_cast<Eigen::Index>(scenario_.units.size());
  const auto ncl = static_cast<Eigen::Index>(scenario_.controllable_loads.size());
  Vector y(ng + ncl);
  const Vector setpoint = layout_.theta.length > 0 ? Vector(segment(x, layout_.theta))
                                                   : Vector(segment(x, layout_.mechanical_power));
  y.head(ng) = marginal_costs(setpoint, costs_);
  const auto theta_l = segment(x, layout_.theta_load);
  for (Eigen::Index j = 0; j < ncl; ++j) {
    y[ng + j] = load_marginal_signal(theta_l[j], scenario_.controllable_loads[static_cast<std::size_t>(j)].benefit);
  }
  return y;
}

Vector ClosedLoopSystem::steam_power_full(const Vector& x) const {
  Vector ps = segment(x, layout_.mechanical_power);
  for (std::size_t i = 0; i < layout_.steam_index.size(); ++i) {
    if (layout_.steam_index[i] >= 0) {
      ps[static_cast<Eigen::Index>(i)] =
          x[layout_.steam_power.offset + layout_.steam_index[i]];
    }
  }
  return ps;
}

void ClosedLoopSystem::derivative(double t, const Vector& x, const Segment& seg,
                                  Vector& dx) const {
  dx.setZero(x.size());
  const auto& L = layout_;
  const Vector pl = uncontrollable_load(t, seg);
  const Vector omega_g = segment(x, L.omega_g);
  const Vector pm = segment(x, L.mechanical_power);
  const GridState gs{segment(x, L.eta), omega_g};
  const GridDerivative gd = grid_rhs(scenario_.network, gs, pm, network_load(x, pl));
  segment(dx, L.eta) = gd.eta_dot;
  segment(dx, L.omega_g) = gd.omega_g_dot;
  if (scenario_.family == ControllerFamily::none) return;

  const Vector theta = segment(x, L.theta);
  const Vector ps = steam_power_full(x);
  for (std::size_t u = 0; u < governors_.size(); ++u) {
    const auto i = static_cast<Eigen::Index>(u);
    const auto& gov = governors_[u];
    if (gov.order == 1) {
      dx[L.mechanical_power.offset + i] = tg1_rhs(pm[i], omega_g[i], theta[i], gov);
    } else {
      const auto d = tg2_rhs(ps[i], pm[i], omega_g[i], theta[i], gov);
      dx[L.steam_power.offset + L.steam_index[u]] = d.steam_power;
      dx[L.mechanical_power.offset + i] = d.mechanical_power;
    }
  }

  if (scenario_.family == ControllerFamily::consensus) {
    const Vector dis = marginal_disagreement(scenario_.comm, marginal_signal(x));
    for (std::size_t u = 0; u < governors_.size(); ++u) {
      const auto i = static_cast<Eigen::Index>(u);
      const auto& gov = governors_[u];
      const double q = costs_[u].q;
      dx[L.theta.offset + i] =
          gov.order == 1
              ? consensus_rhs_order1(theta[i], pm[i], dis[i], q, gov)
              : consensus_rhs_order2(theta[i], ps[i], omega_g[i], dis[i], q, gov, seg.gain[u]);
    }
    const auto ng = static_cast<Eigen::Index>(governors_.size());
    for (std::size_t j = 0; j < scenario_.controllable_loads.size(); ++j) {
      const auto& c = scenario_.controllable_loads[j];
      const auto jj = static_cast<Eigen::Index>(j);
      dx[L.theta_load.offset + jj] = load_controller_rhs(
          gd.omega_l[static_cast<Eigen::Index>(c.load_index)], dis[ng + jj], c.benefit,
          c.control_time);
    }
  } else {
    const auto pd = primal_dual_rhs(scenario_.network, costs_, governors_, theta,
                                    segment(x, L.flow), segment(x, L.lambda), pm, ps,
                                    omega_g, pl, scenario_.primal_dual_gains);
    segment(dx, L.theta) = pd.theta_dot;
    segment(dx, L.flow) = pd.flow_dot;
    segment(dx, L.lambda) = pd.lambda_dot;
  }
}

SystemState ClosedLoopSystem::pack(const Equilibrium& eq) const {
  SystemState s{layout_, Vector::Zero(layout_.size())};
  auto& x = s.values;
  segment(x, layout_.eta) = eq.eta;
  segment(x, layout_.omega_g) = eq.omega_g;
  segment(x, layout_.mechanical_power) = eq.mechanical_power;
  for (std::size_t i = 0; i < layout_.steam_index.size(); ++i) {
    if (layout_.steam_index[i] >= 0) {
      x[layout_.steam_power.offset + layout_.steam_index[i]] =
          eq.steam_power[static_cast<Eigen::Index>(i)];
    }
  }
  if (layout_.theta.length > 0) segment(x, layout_.theta) = eq.theta;
  if (layout_.flow.length > 0) segment(x, layout_.flow) = eq.flow;
  if (layout_.lambda.length > 0) segment(x, layout_.lambda) = eq.lambda;
  if (layout_.theta_load.length > 0) segment(x, layout_.theta_load) = eq.theta_load;
  return s;
}

SystemState initialize(const Scenario& scenario) {
  const ClosedLoopSystem system(scenario);
  return system.pack(equilibrium(system.scenario(), system.scenario().initial_loads));
}

bool step(const ClosedLoopSystem& system, double t, double dt, Vector& x) {
  const double end = t + dt;
  double a = t;
  auto advance = [&](double b) {
    const auto seg = system.segment_at(a);
    auto f = [&](double tt, const Vector& xx, Vector& dxx) {
      system.derivative(tt, xx, seg, dxx);
    };
    x = rk4_step(f, a, x, b - a);
    a = b;
  };
  for (double bp : system.breakpoints()) {
    if (bp > a + kTimeEps && bp < end - kTimeEps) advance(bp);
  }
  advance(end);
  if (!x.allFinite()) return false;
  return x.lpNorm<Eigen::Infinity>() <= system.scenario().integrator.divergence_bound;
}

Trajectory simulate(const ClosedLoopSystem& system, std::optional<Vector> initial_state) {
  const auto& scenario = system.scenario();
  const double dt = scenario.integrator.dt;
  const auto n_steps =
      static_cast<std::size_t>(std::floor(scenario.integrator.horizon / dt + 1e-9));

  Trajectory traj;
  traj.layout = system.layout();
  Vector x = initial_state ? *initial_state
                           : system.pack(equilibrium(scenario, scenario.initial_loads)).values;
  if (x.size() != traj.layout.size()) throw ValidationError("initial state has the wrong dimension");
  const auto rows = static_cast<Eigen::Index>(n_steps + 1);
  traj.time.reserve(n_steps + 1);
  traj.states.resize(rows, x.size());
  traj.loads.resize(rows, static_cast<Eigen::Index>(scenario.network.n_load()));

  auto record = [&](std::size_t k, double t) {
    traj.time.push_back(t);
    traj.states.row(static_cast<Eigen::Index>(k)) = x.transpose();
    traj.loads.row(static_cast<Eigen::Index>(k)) =
        system.uncontrollable_load(t, system.segment_at(t)).transpose();
  };
  record(0, 0.0);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double t_next = static_cast<double>(k + 1) * dt;
    const bool ok = step(system, t, t_next - t, x);
    record(k + 1, t_next);
    if (!ok) {
      traj.diverged = true;
      traj.divergence_time = t_next;
      traj.states.conservativeResize(static_cast<Eigen::Index>(k + 2), Eigen::NoChange);
      traj.loads.conservativeResize(static_cast<Eigen::Index>(k + 2), Eigen::NoChange);
      break;
    }
  }
  return traj;
}

Trajectory simulate(const Scenario& scenario) {
  return simulate(ClosedLoopSystem(scenario));
}

}  // namespace olfc
