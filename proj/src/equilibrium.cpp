#include "socshape/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace socshape {

void SolverOptions::validate() const {
  if (!(tol_residual > 0.0)) throw PreconditionError("tol_residual must be positive");
  if (max_iters < 1) throw PreconditionError("max_iters must be >= 1");
  if (!(fd_step > 0.0)) throw PreconditionError("fd_step must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) throw PreconditionError("damping must be in (0, 1]");
  if (!(lambda_init >= 0.0)) throw PreconditionError("lambda_init must be non-negative");
}

const char* to_string(SolverIterate::Phase phase) {
  switch (phase) {
    case SolverIterate::Phase::ZeroPrice: return "zero-price";
    case SolverIterate::Phase::Newton: return "newton";
    case SolverIterate::Phase::Fallback: return "fallback";
    case SolverIterate::Phase::Polish: return "polish";
  }
  return "?";
}

std::vector<AgentTrajectory> best_responses(const Scenario& s, const PriceVector& prices) {
  std::vector<AgentTrajectory> out;
  out.reserve(s.agents.size());
  for (const auto& agent : s.agents) out.push_back(best_response(agent, prices));
  return out;
}

namespace {

Vector demand_of(const std::vector<AgentTrajectory>& trajectories, std::size_t horizon) {
  Vector demand = Vector::Zero(static_cast<Eigen::Index>(horizon));
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t < horizon; ++t) demand(static_cast<Eigen::Index>(t)) += traj.consumption[t];
  }
  return demand;
}

}  // namespace

Vector excess_demand(const Scenario& s, const PriceVector& prices) {
  if (prices.size() != s.horizon) throw PreconditionError("excess_demand: price vector length != N");
  Vector d = demand_of(best_responses(s, prices), s.horizon);
  const auto c = s.total_supply();
  for (std::size_t t = 0; t < s.horizon; ++t) d(static_cast<Eigen::Index>(t)) -= c[t];
  return d;
}

double fischer_burmeister(double a, double b) {
  const double r = std::hypot(a, b);
  if (a > 0.0 && b > 0.0) return 2.0 * a * b / (a + b + r);
  return a + b - r;
}

Vector complementarity_residual(const Scenario& s, const PriceVector& prices) {
  const Vector d = excess_demand(s, prices);
  const auto c = s.total_supply();
  Vector f(d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    f(k) = fischer_burmeister(prices.values(k), -d(k) / c[static_cast<std::size_t>(k)]);
  }
  return f;
}

namespace {

class ClearingSolver {
 public:
  ClearingSolver(const Scenario& s, const SolverOptions& opts)
      : s_(s), opts_(opts), supply_(s.total_supply()), n_(static_cast<Eigen::Index>(s.horizon)) {}

  PriceVector solve() {
    // Zero-price regime: if unconstrained demand already fits everywhere,
    // lambda = 0 is the equilibrium.
    const PriceVector zero = PriceVector::constant(s_.horizon, 0.0);
    const Vector f0 = residual(zero.values);
    record(SolverIterate::Phase::ZeroPrice, zero.values, f0.norm(), 1.0);
    if (f0.lpNorm<Eigen::Infinity>() <= opts_.tol_residual) return zero;

    Vector lambda = Vector::Constant(n_, std::max(0.0, opts_.lambda_init));
    bool converged = newton(lambda);
    if (!converged) {
      if (!opts_.fallback) fail("Newton iteration did not converge and fallback is disabled");
      used_fallback_ = true;
      lambda = best_;
      converged = gauss_seidel(lambda);
      if (!converged) fail("Newton and coordinate-bisection fallback did not converge");
    }
    polish(lambda);
    snap_zero_prices(lambda);
    return PriceVector(lambda);
  }

  std::vector<SolverIterate> take_trace() { return std::move(trace_); }
  bool used_fallback() const { return used_fallback_; }

 private:
  Vector residual(const Vector& lambda) {
    return complementarity_residual(s_, PriceVector(lambda));
  }

  double demand_k(const Vector& lambda, Eigen::Index k) {
    return excess_demand(s_, PriceVector(lambda))(k);
  }

  void record(SolverIterate::Phase phase, const Vector& lambda, double norm, double scale) {
    trace_.push_back({static_cast<int>(trace_.size()), phase, lambda, norm, scale});
    if (norm < best_norm_) {
      best_norm_ = norm;
      best_ = lambda;
    }
  }

  [[noreturn]] void fail(const std::string& why) {
    std::ostringstream os;
    os << "solve_equilibrium: " << why << " (best residual " << best_norm_ << ")";
    throw SolverFailure(os.str(), trace_, PriceVector(best_));
  }

  Matrix jacobian(const Vector& lambda, const Vector& f) {
    Matrix jac(n_, n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const double h = opts_.fd_step * std::max(1.0, std::abs(lambda(j)));
      Vector shifted = lambda;
      shifted(j) += h;
      jac.col(j) = (residual(shifted) - f) / h;
    }
    return jac;
  }

  /// One damped, projected Newton step. Returns false on stagnation.
  bool newton_step(Vector& lambda, Vector& f, SolverIterate::Phase phase) {
    const Matrix jac = jacobian(lambda, f);
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) return false;
    const Vector step = lu.solve(-f);
    const double norm = f.norm();
    for (double scale = opts_.damping; scale >= 1e-10; scale *= 0.5) {
      const Vector trial = (lambda + scale * step).cwiseMax(0.0);
      const Vector ft = residual(trial);
      if (ft.norm() < norm) {
        lambda = trial;
        f = ft;
        record(phase, lambda, f.norm(), scale);
        return true;
      }
    }
    return false;
  }

  bool newton(Vector& lambda) {
    Vector f = residual(lambda);
    record(SolverIterate::Phase::Newton, lambda, f.norm(), 0.0);
    for (int it = 0; it < opts_.max_iters; ++it) {
      if (f.lpNorm<Eigen::Infinity>() <= opts_.tol_residual) return true;
      if (!newton_step(lambda, f, SolverIterate::Phase::Newton)) return false;
    }
    return f.lpNorm<Eigen::Infinity>() <= opts_.tol_residual;
  }

  /// A few extra Newton steps past tolerance; kept only while they help.
  void polish(Vector& lambda) {
    Vector f = residual(lambda);
    for (int it = 0; it < 3 && f.lpNorm<Eigen::Infinity>() > 1e-14; ++it) {
      if (!newton_step(lambda, f, SolverIterate::Phase::Polish)) break;
    }
  }

  /// Solves d_k(lambda) = 0 for lambda_k >= 0 with the other prices fixed.
  double solve_coordinate(Vector& lambda, Eigen::Index k) {
    const double c = supply_[static_cast<std::size_t>(k)];
    Vector probe = lambda;
    probe(k) = 0.0;
    if (demand_k(probe, k) <= 0.0) return 0.0;
    double lo = 0.0;
    double hi = std::max(1.0, lambda(k));
    probe(k) = hi;
    int doublings = 0;
    while (demand_k(probe, k) > 0.0) {
      lo = hi;
      hi *= 2.0;
      probe(k) = hi;
      if (++doublings > 200) fail("coordinate bracket could not be established");
    }
    while (hi - lo > 1e-15 * std::max(1.0, hi)) {
      const double mid = 0.5 * (lo + hi);
      probe(k) = mid;
      const double dk = demand_k(probe, k);
      if (std::abs(dk) <= 1e-3 * opts_.tol_residual * c) return mid;
      if (dk > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  bool gauss_seidel(Vector& lambda) {
    for (int sweep = 0; sweep < opts_.max_iters; ++sweep) {
      for (Eigen::Index k = 0; k < n_; ++k) lambda(k) = solve_coordinate(lambda, k);
      const Vector f = residual(lambda);
      record(SolverIterate::Phase::Fallback, lambda, f.norm(), 1.0);
      if (f.lpNorm<Eigen::Infinity>() <= opts_.tol_residual) return true;
    }
    return false;
  }

  /// Prices on the slack side of the complementarity pair are set to zero.
  void snap_zero_prices(Vector& lambda) {
    const Vector d = excess_demand(s_, PriceVector(lambda));
    bool changed = false;
    for (Eigen::Index k = 0; k < n_; ++k) {
      const double slack = -d(k) / supply_[static_cast<std::size_t>(k)];
      if (lambda(k) > 0.0 && lambda(k) < slack) {
        lambda(k) = 0.0;
        changed = true;
      }
    }
    if (changed) record(SolverIterate::Phase::Polish, lambda, residual(lambda).norm(), 0.0);
  }

  const Scenario& s_;
  const SolverOptions& opts_;
  std::vector<double> supply_;
  Eigen::Index n_;
  std::vector<SolverIterate> trace_;
  Vector best_;
  double best_norm_ = std::numeric_limits<double>::infinity();
  bool used_fallback_ = false;
};

}  // namespace

TradingDecision trading_decisions(const Scenario& s, const PriceVector& prices,
                                  const std::vector<AgentTrajectory>& trajectories,
                                  double price_tol) {
  const auto n = static_cast<Eigen::Index>(s.agents.size());
  const auto horizon = static_cast<Eigen::Index>(s.horizon);
  if (trajectories.size() != s.agents.size() || prices.size() != s.horizon) {
    throw PreconditionError("trading_decisions: prices/trajectories inconsistent with scenario");
  }
  const auto c = s.total_supply();
  TradingDecision out{Matrix::Zero(n, horizon), Matrix::Zero(n, horizon)};
  for (Eigen::Index t = 0; t < horizon; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    double consumed = 0.0;
    for (const auto& traj : trajectories) consumed += traj.consumption[ts];
    const bool active = prices[ts] > price_tol;
    double surplus = 0.0;
    if (!active) {
      surplus = c[ts] - consumed;
      if (surplus < -1e-8 * c[ts]) {
        std::ostringstream os;
        os << "trading_decisions: negative network surplus " << surplus
           << " at zero-price step t = " << t;
        throw NumericalError(os.str());
      }
      surplus = std::max(0.0, surplus);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto is = static_cast<std::size_t>(i);
      const double a = s.agents[is].supply[ts];
      const double slack = active ? 0.0 : surplus * a / c[ts];
      out.slacks(i, t) = slack;
      out.trades(i, t) = a - trajectories[is].consumption[ts] - slack;
    }
  }
  return out;
}

EquilibriumSolution solve_equilibrium(const Scenario& s, const SolverOptions& opts) {
  opts.validate();
  auto report = validate_scenario(s);
  if (!report.valid()) throw InvalidScenario(std::move(report));

  ClearingSolver solver(s, opts);
  EquilibriumSolution sol;
  sol.prices = solver.solve();
  sol.used_fallback = solver.used_fallback();
  sol.trace = solver.take_trace();
  sol.trajectories = best_responses(s, sol.prices);
  auto decision = trading_decisions(s, sol.prices, sol.trajectories);
  sol.trades = std::move(decision.trades);
  sol.slacks = std::move(decision.slacks);

  const Vector demand = demand_of(sol.trajectories, s.horizon);
  const auto c = s.total_supply();
  sol.residuals.resize(s.horizon);
  for (std::size_t t = 0; t < s.horizon; ++t) {
    const double gap = demand(static_cast<Eigen::Index>(t)) - c[t];
    sol.residuals[t] = sol.prices[t] > 0.0 ? std::abs(gap) : std::max(0.0, gap);
  }
  return sol;
}

bool CertificateReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const CertificateCheck* CertificateReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string CertificateReport::to_string() const {
  std::ostringstream os;
  os.precision(6);
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << ": measured " << c.measured
       << " (threshold " << c.threshold << ")";
    if (!c.detail.empty()) os << " " << c.detail;
    os << "\n";
  }
  return os.str();
}

namespace {

struct WorstCase {
  double value = 0.0;
  std::string where;

  void update(double v, const std::string& location) {
    if (v > value || where.empty()) {
      value = v + 0.0;  // no "-0" in reports
      where = location;
    }
  }
};

std::string at(std::size_t t) { return "t = " + std::to_string(t); }
std::string at(std::size_t i, std::size_t t) {
  return "agent " + std::to_string(i) + ", t = " + std::to_string(t);
}

}  // namespace

CertificateReport verify_equilibrium(const Scenario& s, const EquilibriumSolution& sol,
                                     const CertificateTolerances& tol) {
  CertificateReport rep;
  auto add = [&](std::string name, const WorstCase& w, double threshold) {
    rep.checks.push_back({std::move(name), w.value <= threshold, w.value, threshold,
                          w.where.empty() ? std::string() : "at " + w.where});
  };

  const std::size_t n = s.agents.size();
  const std::size_t horizon = s.horizon;
  const bool shapes_ok = sol.prices.size() == horizon && sol.trajectories.size() == n &&
                         static_cast<std::size_t>(sol.trades.rows()) == n &&
                         static_cast<std::size_t>(sol.trades.cols()) == horizon &&
                         static_cast<std::size_t>(sol.slacks.rows()) == n &&
                         static_cast<std::size_t>(sol.slacks.cols()) == horizon;
  if (!shapes_ok) {
    rep.checks.push_back({"shape", false, 0.0, 0.0, "solution dimensions do not match scenario"});
    return rep;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& traj = sol.trajectories[i];
    if (traj.controls.size() != horizon || traj.states.size() != horizon + 1 ||
        traj.consumption.size() != horizon) {
      rep.checks.push_back({"shape", false, 0.0, 0.0, "trajectory length mismatch"});
      return rep;
    }
  }

  const auto c = s.total_supply();
  std::vector<double> consumed(horizon, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < horizon; ++t) {
      consumed[t] += linalg::quadratic_form(s.agents[i].H, sol.trajectories[i].controls[t]);
    }
  }

  WorstCase neg_price, balance, complementarity, feasibility_agg, trade_sum, trade_feas,
      slack_sign, slack_active, dynamics, stationarity, control_bound;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double lam = sol.prices[t];
    const double gap = consumed[t] - c[t];
    neg_price.update(-lam, at(t));
    if (lam > tol.active_price) balance.update(std::abs(gap) / c[t], at(t));
    complementarity.update(std::abs(lam * gap) / c[t], at(t));
    feasibility_agg.update(gap / c[t], at(t));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto tt = static_cast<Eigen::Index>(t);
      sum += sol.trades(ii, tt);
      const double h = linalg::quadratic_form(s.agents[i].H, sol.trajectories[i].controls[t]);
      const double surplus = s.agents[i].supply[t] - h;
      trade_feas.update(sol.trades(ii, tt) - surplus, at(i, t));
      slack_sign.update(-sol.slacks(ii, tt), at(i, t));
      if (lam > tol.active_price) slack_active.update(std::abs(sol.slacks(ii, tt)), at(i, t));
    }
    trade_sum.update(std::abs(sum), at(t));
  }

  const double rho = tight_constants(s).rho;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& agent = s.agents[i];
    const auto& traj = sol.trajectories[i];
    for (std::size_t t = 0; t < horizon; ++t) {
      const Vector next = agent.A * traj.states[t] + agent.B * traj.controls[t];
      const double scale = 1.0 + traj.states[t + 1].norm();
      dynamics.update((next - traj.states[t + 1]).norm() / scale, at(i, t));
      const double bound = std::sqrt(c[t] / rho);
      control_bound.update(traj.controls[t].norm() / bound, at(i, t));
    }
    if ((traj.states[0] - agent.x0).norm() > tol.dynamics_rel * (1.0 + agent.x0.norm())) {
      dynamics.update(std::numeric_limits<double>::infinity(), "agent " + std::to_string(i) + " x(0)");
    }
    const auto grad = control_gradient(agent, sol.prices, traj.controls);
    stationarity.update(stack_controls(grad).norm(), "agent " + std::to_string(i));
  }

  add("price_nonnegative", neg_price, tol.price_floor);
  add("balance", balance, tol.balance_rel);
  add("complementarity", complementarity, tol.complementarity_rel);
  add("aggregate_feasibility", feasibility_agg, tol.balance_rel);
  add("trade_balance", trade_sum, tol.trade_sum);
  add("trade_feasibility", trade_feas, tol.trade_feasibility);
  add("slack_nonnegative", slack_sign, tol.trade_feasibility);
  add("slack_zero_at_positive_price", slack_active, tol.trade_feasibility);
  add("dynamics", dynamics, tol.dynamics_rel);
  add("stationarity", stationarity, tol.stationarity);
  // ||u(t)|| / sqrt(C(t) / rho); 1 is the hard bound.
  add("control_bound", control_bound, 1.0 + 1e-9);
  return rep;
}

double total_welfare(const Scenario& s, const std::vector<AgentTrajectory>& trajectories) {
  double w = 0.0;
  for (std::size_t i = 0; i < s.agents.size(); ++i) w += agent_utility(s.agents[i], trajectories[i]);
  return w;
}

}  // namespace socshape
