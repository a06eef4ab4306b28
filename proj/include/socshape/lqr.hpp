#pragma once

#include <vector>

#include "socshape/core.hpp"

namespace socshape {

/// Cost-to-go Hessians P_0..P_N and feedback gains K_0..K_{N-1} of the
/// price-dependent LQR; the optimal control is u(k) = -K_k x(k).
struct RiccatiSolution {
  std::vector<Matrix> P;
  std::vector<Matrix> gains;
};

struct AgentTrajectory {
  std::vector<Vector> states;       // x(0..N)
  std::vector<Vector> controls;     // u(0..N-1)
  std::vector<double> consumption;  // u(t)' H u(t)
};

/// Backward Riccati recursion with effective control penalty R + lambda_k H,
/// initialized at P_N = Q. Throws PreconditionError on a negative or
/// non-finite price and NumericalError if the inner matrix is not SPD.
RiccatiSolution riccati_backward(const AgentModel& agent, const PriceVector& prices);

/// Optimal trajectory of one agent facing `prices` (closed-loop rollout).
AgentTrajectory best_response(const AgentModel& agent, const PriceVector& prices);

/// Open-loop rollout of a given control sequence from x0.
AgentTrajectory rollout(const AgentModel& agent, const std::vector<Vector>& controls);

/// Objective of the slack-free agent problem:
///   -x(N)'Qx(N) + sum_t [ -x'Qx - u'(R + lambda_t H)u + lambda_t a(t) ].
double control_objective(const AgentModel& agent, const PriceVector& prices,
                         const std::vector<Vector>& controls);

/// Gradient of control_objective w.r.t. each u(t), by the adjoint (costate)
/// recursion p_N = -2 Q x(N), p_t = -2 Q x(t) + A' p_{t+1}.
std::vector<Vector> control_gradient(const AgentModel& agent, const PriceVector& prices,
                                     const std::vector<Vector>& controls);

/// Individual payoff phi(x(N)) + sum_t [f(x, u) + lambda_t e(t)]. Throws
/// PreconditionError naming the step if e(t) > a(t) - h(u(t)) + 1e-9.
double agent_payoff(const AgentModel& agent, const PriceVector& prices,
                    const AgentTrajectory& traj, const std::vector<double>& trades);

/// Total utility sum_t f + phi, i.e. payoff without trading income.
double agent_utility(const AgentModel& agent, const AgentTrajectory& traj);

Vector stack_controls(const std::vector<Vector>& controls);
std::vector<Vector> unstack_controls(const Vector& stacked, std::size_t input_dim);

}  // namespace socshape
