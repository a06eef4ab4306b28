#include "socshape/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

namespace socshape::oracle {

namespace {

struct AscentResult {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Gradient ascent with Barzilai-Borwein trial steps and Armijo backtracking.
/// Near the optimum, where the Armijo test drowns in rounding, a step that
/// shrinks the gradient without measurably lowering the value is accepted.
AscentResult gradient_ascent(const std::function<double(const Vector&)>& value,
                             const std::function<Vector(const Vector&)>& gradient, Vector x,
                             double tol, int max_iters) {
  AscentResult res;
  double fx = value(x);
  Vector g = gradient(x);
  double step = 1.0 / std::max(1.0, g.norm());
  for (int it = 0; it < max_iters; ++it) {
    res.iterations = it;
    const double gnorm = g.norm();
    if (gnorm <= tol) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    Vector x_new, g_new;
    double f_new = 0.0;
    for (int bt = 0; bt < 80; ++bt, step *= 0.5) {
      x_new = x + step * g;
      f_new = value(x_new);
      if (f_new >= fx + 1e-4 * step * gnorm * gnorm) {
        accepted = true;
        g_new = gradient(x_new);
        break;
      }
      if (f_new >= fx - 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx))) {
        g_new = gradient(x_new);
        if (g_new.norm() < gnorm) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    step = sy < 0.0 ? s.squaredNorm() / -sy : 2.0 * step;
    x = std::move(x_new);
    g = std::move(g_new);
    fx = f_new;
  }
  res.grad_norm = g.norm();
  res.converged = res.converged || res.grad_norm <= tol;
  res.x = std::move(x);
  res.value = fx;
  return res;
}

}  // namespace

OracleSolution welfare_oracle(const Scenario& s, const OracleOptions& opts) {
  auto report = validate_scenario(s);
  if (!report.valid()) throw InvalidScenario(std::move(report));
  const std::size_t n = s.agents.size();
  const std::size_t horizon = s.horizon;
  const std::size_t m = s.agents.front().input_dim();
  if (n * horizon * m > 64) throw PreconditionError("welfare_oracle: instance too large (n N m > 64)");

  const auto block = static_cast<Eigen::Index>(horizon * m);
  const auto supply = s.total_supply();
  auto split = [&](const Vector& u, std::size_t i) {
    return unstack_controls(u.segment(static_cast<Eigen::Index>(i) * block, block), m);
  };
  auto constraint = [&](const Vector& u) {
    Vector g = Vector::Zero(static_cast<Eigen::Index>(horizon));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ui = split(u, i);
      for (std::size_t t = 0; t < horizon; ++t) {
        g(static_cast<Eigen::Index>(t)) += linalg::quadratic_form(s.agents[i].H, ui[t]);
      }
    }
    for (std::size_t t = 0; t < horizon; ++t) g(static_cast<Eigen::Index>(t)) -= supply[t];
    return g;
  };

  Vector mu = Vector::Zero(static_cast<Eigen::Index>(horizon));
  double penalty = opts.initial_penalty;
  // Shifted multiplier max(0, mu + penalty * g) acts as a price in each
  // agent's gradient.
  auto shifted = [&](const Vector& g) { return (mu + penalty * g).cwiseMax(0.0); };
  auto value = [&](const Vector& u) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) w += agent_utility(s.agents[i], rollout(s.agents[i], split(u, i)));
    const Vector sh = shifted(constraint(u));
    return w - (sh.squaredNorm() - mu.squaredNorm()) / (2.0 * penalty);
  };
  auto gradient = [&](const Vector& u) {
    const PriceVector price(shifted(constraint(u)));
    Vector grad(u.size());
    for (std::size_t i = 0; i < n; ++i) {
      grad.segment(static_cast<Eigen::Index>(i) * block, block) =
          stack_controls(control_gradient(s.agents[i], price, split(u, i)));
    }
    return grad;
  };

  Vector u = Vector::Zero(static_cast<Eigen::Index>(n) * block);
  double prev_residual = std::numeric_limits<double>::infinity();
  OracleSolution out;
  bool done = false;
  for (int outer = 0; outer < opts.max_outer_iters && !done; ++outer) {
    out.outer_iterations = outer + 1;
    const auto inner = gradient_ascent(value, gradient, u, opts.inner_tol, opts.max_inner_iters);
    if (!inner.converged) {
      std::ostringstream os;
      os << "welfare_oracle: inner non-convergence (gradient norm " << inner.grad_norm
         << ") at outer iteration " << outer;
      throw NumericalError(os.str());
    }
    u = inner.x;
    const Vector g = constraint(u);
    double residual = 0.0;
    for (Eigen::Index t = 0; t < g.size(); ++t) {
      const double v = std::max(g(t), -mu(t) / penalty);
      residual = std::max(residual, std::abs(v) / supply[static_cast<std::size_t>(t)]);
    }
    mu = shifted(g);
    done = residual <= opts.outer_tol;
    if (!done && residual > 0.25 * prev_residual) penalty = std::min(penalty * 10.0, 1e8);
    prev_residual = residual;
  }
  if (!done) throw NumericalError("welfare_oracle: outer loop did not converge");

  out.multipliers = mu;
  out.final_penalty = penalty;
  const Vector g = constraint(u);
  for (std::size_t i = 0; i < n; ++i) {
    out.controls.push_back(split(u, i));
    out.welfare += agent_utility(s.agents[i], rollout(s.agents[i], out.controls.back()));
  }
  for (Eigen::Index t = 0; t < g.size(); ++t) out.feasibility_residuals.push_back(std::max(0.0, g(t)));
  return out;
}

BestResponseCheck best_response_check(const AgentModel& agent, const PriceVector& prices,
                                      const AgentTrajectory& candidate, int trials,
                                      std::uint64_t seed) {
  const std::size_t m = agent.input_dim();
  auto value = [&](const Vector& u) { return control_objective(agent, prices, unstack_controls(u, m)); };
  auto gradient = [&](const Vector& u) {
    return stack_controls(control_gradient(agent, prices, unstack_controls(u, m)));
  };

  const Vector base = stack_controls(candidate.controls);
  BestResponseCheck out;
  out.candidate_objective = value(base);
  const double allowance = 1e-8 * (1.0 + std::abs(out.candidate_objective));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1e-3 * std::max(1.0, base.norm());
  for (int k = 0; k < trials; ++k) {
    Vector delta(base.size());
    for (Eigen::Index j = 0; j < delta.size(); ++j) delta(j) = normal(rng);
    const double radius = scale * std::ldexp(1.0, -(k % 8));
    const Vector trial = base + radius * delta / std::max(delta.norm(), 1e-300);
    out.worst_improvement = std::max(out.worst_improvement, value(trial) - out.candidate_objective);
  }
  const auto polished = gradient_ascent(value, gradient, base, 1e-12, 20000);
  out.worst_improvement = std::max(out.worst_improvement, polished.value - out.candidate_objective);
  out.passed = out.worst_improvement <= allowance;
  return out;
}

}  // namespace socshape::oracle
