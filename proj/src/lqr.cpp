#include "socshape/lqr.hpp"

#include <cmath>
#include <sstream>

namespace socshape {

namespace {

void check_prices(const PriceVector& prices) {
  for (std::size_t k = 0; k < prices.size(); ++k) {
    if (!(prices[k] >= 0.0) || !std::isfinite(prices[k])) {
      std::ostringstream os;
      os << "price at t = " << k << " must be finite and non-negative, got " << prices[k];
      throw PreconditionError(os.str());
    }
  }
}

Matrix effective_penalty(const AgentModel& agent, double price) {
  return agent.R + price * agent.H;
}

}  // namespace

RiccatiSolution riccati_backward(const AgentModel& agent, const PriceVector& prices) {
  check_prices(prices);
  const std::size_t n = prices.size();
  RiccatiSolution sol;
  sol.P.resize(n + 1);
  sol.gains.resize(n);
  sol.P[n] = agent.Q;

  const Matrix& A = agent.A;
  const Matrix& B = agent.B;
  for (std::size_t k = n; k-- > 0;) {
    const Matrix& next = sol.P[k + 1];
    const Matrix inner = B.transpose() * next * B + effective_penalty(agent, prices[k]);
    Eigen::LLT<Matrix> llt(linalg::symmetrize(inner));
    if (llt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "Riccati inner matrix not positive definite at k = " << k
         << " (smallest eigenvalue " << linalg::min_eigenvalue(inner) << ", rcond "
         << Eigen::FullPivLU<Matrix>(inner).rcond() << ")";
      throw NumericalError(os.str());
    }
    const Matrix BtPA = B.transpose() * next * A;
    sol.gains[k] = llt.solve(BtPA);
    const Matrix pk = A.transpose() * next * A + agent.Q - BtPA.transpose() * sol.gains[k];
    sol.P[k] = linalg::symmetrize(pk);
  }
  return sol;
}

AgentTrajectory best_response(const AgentModel& agent, const PriceVector& prices) {
  const RiccatiSolution ric = riccati_backward(agent, prices);
  const std::size_t n = prices.size();
  AgentTrajectory traj;
  traj.states.reserve(n + 1);
  traj.controls.reserve(n);
  traj.consumption.reserve(n);
  traj.states.push_back(agent.x0);
  for (std::size_t k = 0; k < n; ++k) {
    const Vector& x = traj.states.back();
    Vector u = -ric.gains[k] * x;
    traj.consumption.push_back(linalg::quadratic_form(agent.H, u));
    traj.states.push_back(agent.A * x + agent.B * u);
    traj.controls.push_back(std::move(u));
  }
  return traj;
}

AgentTrajectory rollout(const AgentModel& agent, const std::vector<Vector>& controls) {
  AgentTrajectory traj;
  traj.states.push_back(agent.x0);
  for (const auto& u : controls) {
    const Vector& x = traj.states.back();
    traj.consumption.push_back(linalg::quadratic_form(agent.H, u));
    traj.states.push_back(agent.A * x + agent.B * u);
    traj.controls.push_back(u);
  }
  return traj;
}

double control_objective(const AgentModel& agent, const PriceVector& prices,
                         const std::vector<Vector>& controls) {
  const AgentTrajectory traj = rollout(agent, controls);
  double value = -linalg::quadratic_form(agent.Q, traj.states.back());
  for (std::size_t t = 0; t < controls.size(); ++t) {
    const double lam = prices[t];
    value -= linalg::quadratic_form(agent.Q, traj.states[t]);
    value -= linalg::quadratic_form(effective_penalty(agent, lam), controls[t]);
    if (t < agent.supply.size()) value += lam * agent.supply[t];
  }
  return value;
}

std::vector<Vector> control_gradient(const AgentModel& agent, const PriceVector& prices,
                                     const std::vector<Vector>& controls) {
  const AgentTrajectory traj = rollout(agent, controls);
  const std::size_t n = controls.size();
  std::vector<Vector> grad(n);
  // costate of x(t+1)
  Vector costate = -2.0 * agent.Q * traj.states[n];
  for (std::size_t t = n; t-- > 0;) {
    grad[t] = -2.0 * effective_penalty(agent, prices[t]) * controls[t] +
              agent.B.transpose() * costate;
    costate = -2.0 * agent.Q * traj.states[t] + agent.A.transpose() * costate;
  }
  return grad;
}

double agent_utility(const AgentModel& agent, const AgentTrajectory& traj) {
  double value = -linalg::quadratic_form(agent.Q, traj.states.back());
  for (std::size_t t = 0; t < traj.controls.size(); ++t) {
    value -= linalg::quadratic_form(agent.Q, traj.states[t]);
    value -= linalg::quadratic_form(agent.R, traj.controls[t]);
  }
  return value;
}

double agent_payoff(const AgentModel& agent, const PriceVector& prices,
                    const AgentTrajectory& traj, const std::vector<double>& trades) {
  const std::size_t n = traj.controls.size();
  if (trades.size() != n || prices.size() != n) {
    throw PreconditionError("agent_payoff: trades, prices and trajectory lengths differ");
  }
  double value = agent_utility(agent, traj);
  for (std::size_t t = 0; t < n; ++t) {
    const double surplus = agent.supply.at(t) - linalg::quadratic_form(agent.H, traj.controls[t]);
    if (trades[t] > surplus + 1e-9) {
      std::ostringstream os;
      os << "agent_payoff: trade " << trades[t] << " exceeds surplus " << surplus
         << " at t = " << t;
      throw PreconditionError(os.str());
    }
    value += prices[t] * trades[t];
  }
  return value;
}

Vector stack_controls(const std::vector<Vector>& controls) {
  Eigen::Index total = 0;
  for (const auto& u : controls) total += u.size();
  Vector out(total);
  Eigen::Index offset = 0;
  for (const auto& u : controls) {
    out.segment(offset, u.size()) = u;
    offset += u.size();
  }
  return out;
}

std::vector<Vector> unstack_controls(const Vector& stacked, std::size_t input_dim) {
  const auto m = static_cast<Eigen::Index>(input_dim);
  if (m == 0 || stacked.size() % m != 0) {
    throw PreconditionError("unstack_controls: length is not a multiple of the input dimension");
  }
  std::vector<Vector> out;
  for (Eigen::Index k = 0; k < stacked.size(); k += m) out.push_back(stacked.segment(k, m));
  return out;
}

}  // namespace socshape
