#include "olfc/grid.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

#include "olfc/error.hpp"

namespace olfc {

std::vector<std::vector<std::size_t>> connected_components(
    std::size_t n_nodes,
    const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> parent(n_nodes);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& [a, b] : edges) {
    if (a >= n_nodes || b >= n_nodes) continue;
    const auto ra = find(a);
    const auto rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::vector<std::size_t>> components;
  std::vector<std::optional<std::size_t>> slot(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto root = find(i);
    if (!slot[root]) {
      slot[root] = components.size();
      components.emplace_back();
    }
    components[*slot[root]].push_back(i);
  }
  return components;
}

namespace {

std::string describe_components(
    const std::vector<std::vector<std::size_t>>& components) {
  std::ostringstream os;
  os << components.size() << " components:";
  for (const auto& c : components) {
    os << " {";
    for (std::size_t k = 0; k < c.size(); ++k) os << (k ? "," : "") << c[k] + 1;
    os << "}";
  }
  return os.str();
}

}  // namespace

Matrix build_incidence(const NetworkTopology& topology) {
  const std::size_t n = topology.n_bus();
  const std::size_t m = topology.lines.size();
  if (n == 0) throw ValidationError("network has no buses");
  Matrix incidence = Matrix::Zero(static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    const auto [from, to] = topology.lines[k];
    if (from >= n || to >= n) {
      throw ValidationError("line " + std::to_string(k + 1) +
                            " references a bus outside 1.." + std::to_string(n));
    }
    if (from == to) {
      throw ValidationError("line " + std::to_string(k + 1) + " is a self-loop");
    }
    incidence(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(k)) = 1.0;
    incidence(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(k)) = -1.0;
  }
  const auto components = connected_components(n, topology.lines);
  if (components.size() != 1) {
    throw DisconnectedGraphError("physical network is disconnected, " +
                                 describe_components(components));
  }
  return incidence;
}

NetworkModel::NetworkModel(std::vector<BusParams> buses,
                           std::vector<LineParams> lines)
    : buses_(std::move(buses)), lines_(std::move(lines)) {
  bool seen_load = false;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto& bus = buses_[i];
    const std::string where = "bus " + std::to_string(i + 1);
    if (bus.kind == BusKind::generator) {
      if (seen_load) throw ValidationError(where + ": generator buses must precede load buses");
      if (!(bus.inertia > 0.0)) throw ValidationError(where + ": inertia must be positive");
      ++n_gen_;
    } else {
      seen_load = true;
      ++n_load_;
    }
    if (!(bus.damping > 0.0)) throw ValidationError(where + ": damping must be positive");
    if (!(bus.voltage > 0.0)) throw ValidationError(where + ": voltage must be positive");
  }
  incidence_ = build_incidence(topology());

  const auto ng = static_cast<Eigen::Index>(n_gen_);
  const auto nl = static_cast<Eigen::Index>(n_load_);
  incidence_gen_ = incidence_.topRows(ng);
  incidence_load_ = incidence_.bottomRows(nl);

  gamma_.resize(static_cast<Eigen::Index>(lines_.size()));
  for (std::size_t k = 0; k < lines_.size(); ++k) {
    const auto& line = lines_[k];
    const double g = buses_[line.from].voltage * buses_[line.to].voltage *
                     std::abs(line.susceptance);
    if (!(g > 0.0)) {
      throw ValidationError("line " + std::to_string(k + 1) +
                            ": susceptance must be nonzero");
    }
    gamma_[static_cast<Eigen::Index>(k)] = g;
  }

  inertia_.resize(ng);
  damping_gen_.resize(ng);
  damping_load_.resize(nl);
  for (Eigen::Index i = 0; i < ng; ++i) {
    inertia_[i] = buses_[static_cast<std::size_t>(i)].inertia;
    damping_gen_[i] = buses_[static_cast<std::size_t>(i)].damping;
  }
  for (Eigen::Index i = 0; i < nl; ++i) {
    damping_load_[i] = buses_[static_cast<std::size_t>(ng + i)].damping;
  }
}

NetworkTopology NetworkModel::topology() const {
  NetworkTopology t;
  t.n_gen = n_gen_;
  t.n_load = n_load_;
  t.lines.reserve(lines_.size());
  for (const auto& line : lines_) t.lines.emplace_back(line.from, line.to);
  return t;
}

Vector NetworkModel::line_injections(const Vector& eta) const {
  return incidence_ * gamma_.cwiseProduct(eta.array().sin().matrix());
}

Vector derived_load_frequency(const NetworkModel& model, const Vector& eta,
                              const Vector& load) {
  if (eta.size() != static_cast<Eigen::Index>(model.n_line()) ||
      load.size() != static_cast<Eigen::Index>(model.n_load())) {
    throw ValidationError("derived_load_frequency: dimension mismatch");
  }
  const Vector flow = model.gamma().cwiseProduct(eta.array().sin().matrix());
  return (-(model.incidence_load() * flow) - load)
      .cwiseQuotient(model.damping_load());
}

GridDerivative grid_rhs(const NetworkModel& model, const GridState& state,
                        const Vector& mechanical_power, const Vector& load) {
  const Vector flow =
      model.gamma().cwiseProduct(state.eta.array().sin().matrix());
  GridDerivative d;
  d.omega_l = (-(model.incidence_load() * flow) - load)
                  .cwiseQuotient(model.damping_load());
  d.eta_dot = model.incidence_gen().transpose() * state.omega_g +
              model.incidence_load().transpose() * d.omega_l;
  d.omega_g_dot = (-model.damping_gen().cwiseProduct(state.omega_g) -
                   model.incidence_gen() * flow + mechanical_power)
                      .cwiseQuotient(model.inertia());
  return d;
}

double synchronous_frequency(const Vector& mechanical_power, const Vector& load,
                             const Vector& damping_gen,
                             const Vector& damping_load) {
  const double total_damping = damping_gen.sum() + damping_load.sum();
  if (!(total_damping > 0.0)) {
    throw ValidationError("synchronous frequency undefined without positive damping");
  }
  return (mechanical_power.sum() - load.sum()) / total_damping;
}

bool is_secure(const Vector& eta) {
  return (eta.array().abs() < std::numbers::pi / 2).all();
}

namespace {

struct NewtonOutcome {
  bool converged = false;
  Vector delta;
  double residual = 0.0;
  int iterations = 0;
};

NewtonOutcome damped_newton(const NetworkModel& model, const Vector& target,
                            Vector delta, const SteadyStateOptions& options) {
  const Matrix& b = model.incidence();
  const Vector& gamma = model.gamma();
  const Eigen::Index n = b.rows();
  auto residual_of = [&](const Vector& d) -> Vector {
    const Vector eta = b.transpose() * d;
    return b * gamma.cwiseProduct(eta.array().sin().matrix()) - target;
  };

  NewtonOutcome out;
  Vector r = residual_of(delta);
  double norm = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it <= options.max_iterations; ++it) {
    out.iterations = it;
    if (!std::isfinite(norm)) break;
    if (norm <= options.tolerance) {
      out.converged = true;
      break;
    }
    if (it == options.max_iterations) break;
    const Vector eta = b.transpose() * delta;
    const Matrix jac = b * gamma.cwiseProduct(eta.array().cos().matrix()).asDiagonal() *
                       b.transpose();
    const Vector step = jac.bottomRightCorner(n - 1, n - 1)
                            .fullPivLu()
                            .solve(-r.tail(n - 1));
    if (!step.allFinite()) break;
    double alpha = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      Vector trial = delta;
      trial.tail(n - 1) += alpha * step;
      const Vector trial_r = residual_of(trial);
      const double trial_norm = trial_r.lpNorm<Eigen::Infinity>();
      if (std::isfinite(trial_norm) && trial_norm < norm) {
        delta = std::move(trial);
        r = trial_r;
        norm = trial_norm;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  out.delta = std::move(delta);
  out.residual = norm;
  return out;
}

}  // namespace

SteadyState solve_steady_state(const NetworkModel& model,
                               const Vector& mechanical_power,
                               const Vector& load,
                               const SteadyStateOptions& options) {
  if (mechanical_power.size() != static_cast<Eigen::Index>(model.n_gen()) ||
      load.size() != static_cast<Eigen::Index>(model.n_load())) {
    throw ValidationError("solve_steady_state: dimension mismatch");
  }
  SteadyState ss;
  ss.omega_star = synchronous_frequency(mechanical_power, load,
                                        model.damping_gen(), model.damping_load());
  const auto ng = static_cast<Eigen::Index>(model.n_gen());
  const auto nl = static_cast<Eigen::Index>(model.n_load());
  Vector target(ng + nl);
  target.head(ng) = mechanical_power - model.damping_gen() * ss.omega_star;
  target.tail(nl) = -load - model.damping_load() * ss.omega_star;

  const Eigen::Index n = ng + nl;
  NewtonOutcome outcome =
      damped_newton(model, target, Vector::Zero(n), options);
  if (!outcome.converged) {
    // DC power-flow start: sin(eta) ~ eta.
    const Matrix& b = model.incidence();
    const Matrix laplacian = b * model.gamma().asDiagonal() * b.transpose();
    Vector delta = Vector::Zero(n);
    delta.tail(n - 1) =
        laplacian.bottomRightCorner(n - 1, n - 1).ldlt().solve(target.tail(n - 1));
    outcome = damped_newton(model, target, delta, options);
  }
  if (!outcome.converged) {
    std::ostringstream os;
    os << "no steady state found (residual " << outcome.residual << " after "
       << outcome.iterations << " Newton iterations); the network cannot carry "
       << "the requested transfer";
    throw InfeasibleError(os.str());
  }
  ss.eta = model.incidence().transpose() * outcome.delta;
  ss.residual = outcome.residual;
  ss.iterations = outcome.iterations;
  ss.secure = is_secure(ss.eta);
  return ss;
}

}  // namespace olfc
