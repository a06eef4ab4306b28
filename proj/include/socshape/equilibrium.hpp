#pragma once

#include <string>
#include <vector>

#include "socshape/core.hpp"
#include "socshape/lqr.hpp"

namespace socshape {

struct SolverOptions {
  /// Convergence threshold on the complementarity residual; the demand part
  /// is measured relative to C(t).
  double tol_residual = 1e-8;
  int max_iters = 200;
  /// Relative forward-difference step for the Jacobian columns.
  double fd_step = 1e-6;
  /// Initial Newton step scale, halved on non-decrease.
  double damping = 1.0;
  double lambda_init = 1.0;
  /// Enables the Gauss-Seidel coordinate bisection when Newton stalls.
  bool fallback = true;

  /// Throws PreconditionError on nonsensical settings.
  void validate() const;
};

struct SolverIterate {
  enum class Phase { ZeroPrice, Newton, Fallback, Polish };
  int iteration = 0;
  Phase phase = Phase::Newton;
  Vector prices;
  /// Euclidean norm of the complementarity residual at `prices`.
  double residual_norm = 0.0;
  /// Accepted step scale (Newton) or 1 (fallback sweeps).
  double step_scale = 1.0;
};

const char* to_string(SolverIterate::Phase phase);

struct EquilibriumSolution {
  PriceVector prices;
  std::vector<AgentTrajectory> trajectories;
  Matrix trades;  // n x N
  Matrix slacks;  // n x N
  /// |sum_i h_i(u_i(t)) - C(t)| at positive-price steps; at zero-price steps
  /// the over-consumption max(0, sum_i h_i - C(t)).
  std::vector<double> residuals;
  std::vector<SolverIterate> trace;
  bool used_fallback = false;
};

/// Raised when neither Newton nor the fallback reach tol_residual.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, std::vector<SolverIterate> trace, PriceVector best)
      : Error(what), trace_(std::move(trace)), best_(std::move(best)) {}
  const std::vector<SolverIterate>& trace() const { return trace_; }
  const PriceVector& best_iterate() const { return best_; }

 private:
  std::vector<SolverIterate> trace_;
  PriceVector best_;
};

/// d_k = sum_i u_i*(k)' H_i u_i*(k) - C(k) where u_i* is the best response.
Vector excess_demand(const Scenario& s, const PriceVector& prices);

/// Best responses of all agents to `prices`.
std::vector<AgentTrajectory> best_responses(const Scenario& s, const PriceVector& prices);

/// Fischer-Burmeister composition phi(a, b) = a + b - sqrt(a^2 + b^2); zero
/// iff a >= 0, b >= 0, a b = 0.
double fischer_burmeister(double a, double b);

/// Per-step complementarity residual phi(lambda_k, -d_k / C(k)).
Vector complementarity_residual(const Scenario& s, const PriceVector& prices);

/// Competitive-equilibrium prices and allocation. Throws InvalidScenario,
/// SolverFailure.
EquilibriumSolution solve_equilibrium(const Scenario& s, const SolverOptions& opts = {});

struct TradingDecision {
  Matrix trades;
  Matrix slacks;
};

/// Trades and slacks completing (prices, trajectories) into an equilibrium.
/// Steps with price > price_tol sell the whole surplus; other steps split
/// the network surplus across agents in proportion to local supply. Throws
/// NumericalError if a zero-price step has negative network surplus.
TradingDecision trading_decisions(const Scenario& s, const PriceVector& prices,
                                  const std::vector<AgentTrajectory>& trajectories,
                                  double price_tol = 0.0);

struct CertificateCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct CertificateReport {
  std::vector<CertificateCheck> checks;
  bool passed() const;
  const CertificateCheck* find(const std::string& name) const;
  std::string to_string() const;
};

/// Certificate tolerances. Defaults are the acceptance thresholds.
struct CertificateTolerances {
  double price_floor = 1e-8;
  double active_price = 1e-6;
  double balance_rel = 1e-6;
  double complementarity_rel = 1e-6;
  double trade_sum = 1e-7;
  double trade_feasibility = 1e-7;
  double stationarity = 1e-6;
  double dynamics_rel = 1e-8;
};

/// Re-checks every equilibrium condition on `sol`; diagnostics only.
CertificateReport verify_equilibrium(const Scenario& s, const EquilibriumSolution& sol,
                                     const CertificateTolerances& tol = {});

/// Sum of agent utilities (no trading income) under the given trajectories.
double total_welfare(const Scenario& s, const std::vector<AgentTrajectory>& trajectories);

}  // namespace socshape
