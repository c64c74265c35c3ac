#include "olfc/dispatch.hpp"

#include <cmath>
#include <limits>

#include "olfc/error.hpp"

namespace olfc {

namespace {

void check_costs(std::span<const CostFunction> costs) {
  if (costs.empty()) throw ValidationError("dispatch needs at least one generator");
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!(costs[i].q > 0.0)) {
      throw ValidationError("cost " + std::to_string(i + 1) +
                            ": quadratic coefficient must be positive");
    }
  }
}

}  // namespace

double total_cost(std::span<const CostFunction> costs, const Vector& power) {
  double c = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    c += costs[i].value(power[static_cast<Eigen::Index>(i)]);
  }
  return c;
}

DispatchResult optimal_dispatch(std::span<const CostFunction> costs,
                                double total_load) {
  check_costs(costs);
  double inv_q = 0.0;
  double r_over_q = 0.0;
  for (const auto& c : costs) {
    inv_q += 1.0 / c.q;
    r_over_q += c.r / c.q;
  }
  DispatchResult out;
  out.lambda = (total_load + r_over_q) / inv_q;
  out.mechanical_power.resize(static_cast<Eigen::Index>(costs.size()));
  for (std::size_t i = 0; i < costs.size(); ++i) {
    out.mechanical_power[static_cast<Eigen::Index>(i)] =
        (out.lambda - costs[i].r) / costs[i].q;
  }
  // Put the rounding residue of the balance on the stiffest unit.
  const double residue = total_load - out.mechanical_power.sum();
  Eigen::Index stiffest = 0;
  for (std::size_t i = 1; i < costs.size(); ++i) {
    if (costs[i].q > costs[static_cast<std::size_t>(stiffest)].q) {
      stiffest = static_cast<Eigen::Index>(i);
    }
  }
  out.mechanical_power[stiffest] += residue;
  out.total_cost = total_cost(costs, out.mechanical_power);
  return out;
}

Vector marginal_costs(const Vector& power, std::span<const CostFunction> costs) {
  Vector m(power.size());
  for (Eigen::Index i = 0; i < power.size(); ++i) {
    m[i] = costs[static_cast<std::size_t>(i)].marginal(power[i]);
  }
  return m;
}

DispatchResult brute_force_dispatch(std::span<const CostFunction> costs,
                                    double total_load, double resolution) {
  check_costs(costs);
  if (!(resolution > 0.0)) throw ValidationError("grid resolution must be positive");
  const std::size_t n = costs.size();
  if (n > 4) throw ValidationError("brute-force dispatch is limited to 4 generators");

  Vector best = Vector::Constant(static_cast<Eigen::Index>(n),
                                 total_load / static_cast<double>(n));
  double best_cost = total_cost(costs, best);

  if (n > 1) {
    // Free coordinates P_1..P_{n-1} in a box around the equal split; the last
    // unit closes the balance.
    const double half_width = std::abs(total_load) + 2.0;
    const auto per_axis =
        static_cast<std::size_t>(std::ceil(2.0 * half_width / resolution)) + 1;
    double points = 1.0;
    for (std::size_t d = 0; d + 1 < n; ++d) points *= static_cast<double>(per_axis);
    if (points > 5e7) {
      throw ValidationError("brute-force grid too fine for " + std::to_string(n) +
                            " generators (" + std::to_string(points) + " points)");
    }
    const double center = total_load / static_cast<double>(n);
    std::vector<std::size_t> idx(n - 1, 0);
    Vector trial(static_cast<Eigen::Index>(n));
    while (true) {
      double partial = 0.0;
      for (std::size_t d = 0; d + 1 < n; ++d) {
        const double p = center - half_width + static_cast<double>(idx[d]) * resolution;
        trial[static_cast<Eigen::Index>(d)] = p;
        partial += p;
      }
      trial[static_cast<Eigen::Index>(n - 1)] = total_load - partial;
      const double c = total_cost(costs, trial);
      if (c < best_cost) {
        best_cost = c;
        best = trial;
      }
      std::size_t d = 0;
      while (d < n - 1 && ++idx[d] == per_axis) idx[d++] = 0;
      if (d == n - 1) break;
    }

    // Pattern search over pairwise transfers, which span the balance plane.
    double step = resolution;
    while (step > 1e-12) {
      bool moved = false;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          Vector cand = best;
          cand[static_cast<Eigen::Index>(i)] += step;
          cand[static_cast<Eigen::Index>(j)] -= step;
          const double c = total_cost(costs, cand);
          if (c < best_cost) {
            best_cost = c;
            best = std::move(cand);
            moved = true;
          }
        }
      }
      if (!moved) step *= 0.5;
    }
  }

  DispatchResult out;
  out.mechanical_power = best;
  out.lambda = marginal_costs(best, costs).mean();
  out.total_cost = best_cost;
  return out;
}

WelfareResult social_welfare_dispatch(std::span<const CostFunction> gen_costs,
                                      std::span<const BenefitFunction> benefits,
                                      double inflexible_load) {
  check_costs(gen_costs);
  for (std::size_t j = 0; j < benefits.size(); ++j) {
    if (!(benefits[j].q > 0.0)) {
      throw ValidationError("benefit " + std::to_string(j + 1) +
                            ": quadratic coefficient must be positive");
    }
  }
  // Stationarity: q_i P_i + r_i = lambda = r_j - q_j u_j, plus the balance.
  double inv_q = 0.0;
  double weighted_r = 0.0;
  for (const auto& c : gen_costs) {
    inv_q += 1.0 / c.q;
    weighted_r += c.r / c.q;
  }
  for (const auto& b : benefits) {
    inv_q += 1.0 / b.q;
    weighted_r += b.r / b.q;
  }
  WelfareResult out;
  out.lambda = (inflexible_load + weighted_r) / inv_q;
  out.mechanical_power.resize(static_cast<Eigen::Index>(gen_costs.size()));
  out.controllable_load.resize(static_cast<Eigen::Index>(benefits.size()));
  for (std::size_t i = 0; i < gen_costs.size(); ++i) {
    out.mechanical_power[static_cast<Eigen::Index>(i)] =
        (out.lambda - gen_costs[i].r) / gen_costs[i].q;
  }
  for (std::size_t j = 0; j < benefits.size(); ++j) {
    out.controllable_load[static_cast<Eigen::Index>(j)] =
        (benefits[j].r - out.lambda) / benefits[j].q;
  }
  out.welfare = -total_cost(gen_costs, out.mechanical_power);
  for (std::size_t j = 0; j < benefits.size(); ++j) {
    out.welfare += benefits[j].value(out.controllable_load[static_cast<Eigen::Index>(j)]);
  }
  return out;
}

}  // namespace olfc
