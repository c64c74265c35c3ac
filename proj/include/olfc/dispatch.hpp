#pragma once

// Economic dispatch for linear-quadratic generation costs, a brute-force
// oracle for it, and the social-welfare variant with controllable loads.

#include <span>

#include "olfc/grid.hpp"

namespace olfc {

/// C(P) = q P^2 / 2 + r P + s, with q > 0.
struct CostFunction {
  double q = 1.0;
  double r = 0.0;
  double s = 0.0;

  double value(double p) const { return 0.5 * q * p * p + r * p + s; }
  double marginal(double p) const { return q * p + r; }
};

/// Concave benefit of a controllable load: B(u) = -q u^2 / 2 + r u + s, q > 0.
/// The quadratic coefficient is stored positive; the benefit curves down.
struct BenefitFunction {
  double q = 1.0;
  double r = 0.0;
  double s = 0.0;

  double value(double u) const { return -0.5 * q * u * u + r * u + s; }
  double marginal(double u) const { return r - q * u; }
};

struct DispatchResult {
  Vector mechanical_power;  // P_m^opt
  double lambda = 0.0;      // common marginal cost
  double total_cost = 0.0;  // includes the constant offsets s_i
};

struct WelfareResult {
  Vector mechanical_power;   // P_m^opt
  Vector controllable_load;  // u_l^opt
  double lambda = 0.0;
  double welfare = 0.0;  // sum B_j(u_j) - sum C_i(P_i)
};

double total_cost(std::span<const CostFunction> costs, const Vector& power);

/// Closed-form minimizer of sum C_i(P_i) subject to sum P_i = total_load.
DispatchResult optimal_dispatch(std::span<const CostFunction> costs,
                                double total_load);

/// Q P + R.
Vector marginal_costs(const Vector& power, std::span<const CostFunction> costs);

/// Exhaustive search over the balance hyperplane on a grid of spacing
/// `resolution`, refined by pairwise-transfer pattern search. Independent of
/// the closed form; meant for desk-scale cross-checks (at most 4 generators
/// and a bounded grid size).
DispatchResult brute_force_dispatch(std::span<const CostFunction> costs,
                                    double total_load, double resolution);

/// Maximizes sum B_j(u_j) - sum C_i(P_i) s.t. sum P = inflexible_load + sum u.
/// At the optimum every marginal cost and marginal benefit equals lambda.
WelfareResult social_welfare_dispatch(std::span<const CostFunction> gen_costs,
                                      std::span<const BenefitFunction> benefits,
                                      double inflexible_load);

}  // namespace olfc
