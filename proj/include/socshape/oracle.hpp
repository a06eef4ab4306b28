#pragma once

#include <cstdint>
#include <vector>

#include "socshape/core.hpp"
#include "socshape/lqr.hpp"

namespace socshape::oracle {

/// Direct social-welfare maximizer; its multipliers estimate the
/// competitive prices. For verification on desk-scale instances only.
struct OracleSolution {
  /// Per agent, per step controls.
  std::vector<std::vector<Vector>> controls;
  Vector multipliers;
  double welfare = 0.0;
  /// max(0, sum_i h_i(u_i(t)) - C(t)) per step.
  std::vector<double> feasibility_residuals;
  int outer_iterations = 0;
  double final_penalty = 0.0;
};

struct OracleOptions {
  /// Inner stationarity tolerance on the augmented-objective gradient norm.
  double inner_tol = 1e-10;
  int max_inner_iters = 200000;
  int max_outer_iters = 200;
  /// Outer stop: constraint/complementarity residual relative to C(t).
  double outer_tol = 1e-12;
  double initial_penalty = 10.0;
};

/// Maximizes sum_i utility_i(U_i) subject to sum_i h_i(u_i(t)) <= C(t) with an
/// augmented-Lagrangian outer loop and gradient-ascent inner solves.
/// Requires n * N * m <= 64. Throws PreconditionError / NumericalError.
OracleSolution welfare_oracle(const Scenario& s, const OracleOptions& opts = {});

struct BestResponseCheck {
  bool passed = false;
  /// Largest objective improvement found over the candidate.
  double worst_improvement = 0.0;
  double candidate_objective = 0.0;
};

/// Random control perturbations plus a gradient-ascent polish from the
/// candidate; fails if any alternative improves the agent objective by more
/// than 1e-8 (1 + |objective|).
BestResponseCheck best_response_check(const AgentModel& agent, const PriceVector& prices,
                                      const AgentTrajectory& candidate, int trials,
                                      std::uint64_t seed = 42);

}  // namespace socshape::oracle
