#include "socshape/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "socshape/bounds.hpp"
#include "socshape/csv.hpp"
#include "socshape/scenario_io.hpp"
#include "socshape/shaping.hpp"

namespace socshape::cli {

namespace fs = std::filesystem;
using csv::format_number;

namespace {

std::string sig(double v, int digits) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::showpoint << std::setprecision(digits) << v;
  return os.str();
}

std::string fixed(double v, int decimals) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(decimals) << (v == 0.0 ? 0.0 : v);
  return os.str();
}

SolverOptions solver_options(const RunConfig& c, bool use_max_iters) {
  SolverOptions o;
  if (c.tol) o.tol_residual = *c.tol;
  if (use_max_iters && c.max_iters) o.max_iters = *c.max_iters;
  return o;
}

ShapingOptions shaping_options(const RunConfig& c) {
  ShapingOptions o;
  o.d_rho = c.d_rho;
  o.eps_lambda = c.eps_lambda;
  if (c.max_iters) o.max_iters = *c.max_iters;
  o.strategy = LambdaBarStrategy::parse(c.strategy);
  o.solver = solver_options(c, false);
  return o;
}

Scenario load(const RunConfig& c, std::ostream& err) {
  auto loaded = load_scenario(c.scenario_path);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  if (c.q) return loaded.scenario.with_uniform_preference(*c.q);
  return std::move(loaded.scenario);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("output directory not writable: " + dir.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

csv::Table prices_table(const PriceVector& p) {
  csv::Table t{{"t", "lambda"}, {}};
  for (std::size_t k = 0; k < p.size(); ++k) t.add_row({std::to_string(k), format_number(p[k])});
  return t;
}

csv::Table residuals_table(const Scenario& s, const EquilibriumSolution& sol) {
  csv::Table t{{"t", "lambda", "demand", "supply", "residual"}, {}};
  const auto c = s.total_supply();
  for (std::size_t k = 0; k < s.horizon; ++k) {
    double demand = 0.0;
    for (const auto& traj : sol.trajectories) demand += traj.consumption[k];
    t.add_row({std::to_string(k), format_number(sol.prices[k]), format_number(demand),
               format_number(c[k]), format_number(sol.residuals[k])});
  }
  return t;
}

csv::Table bounds_table(const BoundReport& qp, const BoundReport& dp) {
  csv::Table t{{"k", "cap_qp", "cap_dp"}, {}};
  for (std::size_t k = 0; k < qp.per_step_caps.size(); ++k) {
    t.add_row({std::to_string(k), format_number(qp.per_step_caps[k]),
               format_number(dp.per_step_caps[k])});
  }
  return t;
}

csv::Table trace_table(const BisectionResult& b) {
  csv::Table t{{"k", "b", "d", "L", "lambda_at_L"}, {}};
  for (const auto& st : b.trace) {
    t.add_row({std::to_string(st.k), format_number(st.b), format_number(st.d), format_number(st.L),
               format_number(st.lambda_at_L)});
  }
  return t;
}

std::size_t argmax(const PriceVector& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

void print_bounds(std::ostream& out, const BoundReport& r) {
  out << "delta_max (" << to_string(r.method) << ") = " << sig(r.delta_max, 2) << "  ["
      << format_number(r.delta_max) << "]\n";
  if (!r.notes.empty()) out << "  note: " << r.notes << "\n";
}

void print_constants(std::ostream& out, const ScenarioConstants& k) {
  out << "constants: gamma = " << format_number(k.gamma) << ", alpha = " << format_number(k.alpha)
      << ", beta = " << format_number(k.beta) << ", rho = " << format_number(k.rho) << "\n";
}

void print_shaping(std::ostream& out, const ShapingReport& r) {
  print_constants(out, r.constants);
  print_bounds(out, r.qp);
  print_bounds(out, r.dp);
  const auto& b = r.bisection;
  out << "bisection: strategy " << r.strategy << ", d_rho = " << format_number(r.d_rho)
      << ", eps_lambda = " << format_number(r.eps_lambda) << ", iterations = " << b.trace.size()
      << ", status " << to_string(b.status) << "\n";
  if (b.status == BisectionResult::Status::ThresholdUnreachable) {
    out << "threshold unreachable: all delta <= d_rho admissible\n";
  }
  out << "delta_max (bisection) = " << sig(b.delta_max, 3) << "  [" << format_number(b.delta_max)
      << "], lambda_bar(delta_max) = " << fixed(b.lambda_at_delta, 1) << "  ["
      << format_number(b.lambda_at_delta) << "]\n";
}

nlohmann::json bounds_json(const BoundReport& r) {
  return {{"method", to_string(r.method)}, {"delta_max", r.delta_max}, {"per_step_caps", r.per_step_caps}};
}

nlohmann::json constants_json(const ScenarioConstants& k) {
  return {{"gamma", k.gamma}, {"alpha", k.alpha}, {"beta", k.beta}, {"rho", k.rho}};
}

int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Scenario s = load(c, err);
  const auto rep = validate_scenario(s);
  if (!rep.valid()) {
    err << rep.to_string();
    return kInvalidInput;
  }
  out << "scenario valid: " << s.num_agents() << " agents, horizon " << s.horizon << ", price cap "
      << format_number(s.price_cap) << "\n";
  return kOk;
}

int cmd_equilibrium(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Scenario s = load(c, err);
  const auto sol = solve_equilibrium(s, solver_options(c, true));
  const auto cert = verify_equilibrium(s, sol);
  if (c.write_csv) {
    ensure_dir(c.output_dir);
    write_solution(c.output_dir, s, sol);
    csv::write(c.output_dir / "residuals.csv", residuals_table(s, sol));
  }
  const std::size_t peak = argmax(sol.prices);
  out << "equilibrium prices:";
  for (std::size_t k = 0; k < sol.prices.size(); ++k) out << " " << fixed(sol.prices[k], 3);
  out << "\nmax price " << fixed(sol.prices[peak], 1) << " [" << format_number(sol.prices[peak])
      << "] at t = " << peak << "\n";
  out << "solver: " << sol.trace.size() << " trace entries"
      << (sol.used_fallback ? ", fallback used" : "") << "\n";
  out << cert.to_string();
  if (c.json_summary) {
    ensure_dir(c.output_dir);
    nlohmann::json j{{"prices", std::vector<double>(sol.prices.values.data(),
                                                    sol.prices.values.data() + sol.prices.size())},
                     {"max_price", sol.prices[peak]},
                     {"argmax_t", peak},
                     {"certificate_passed", cert.passed()}};
    write_json(c.output_dir / "summary.json", j);
  }
  if (!cert.passed()) {
    err << "certificate failed\n";
    return kCertificateFailure;
  }
  return kOk;
}

int cmd_bounds(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Scenario s = load(c, err);
  const auto qp = delta_max_qp(s);
  const auto dp = delta_max_dp(s);
  print_constants(out, qp.constants);
  print_bounds(out, qp);
  print_bounds(out, dp);
  if (c.write_csv) {
    ensure_dir(c.output_dir);
    csv::write(c.output_dir / "bounds.csv", bounds_table(qp, dp));
  }
  if (c.json_summary) {
    ensure_dir(c.output_dir);
    write_json(c.output_dir / "summary.json",
               {{"constants", constants_json(qp.constants)}, {"qp", bounds_json(qp)}, {"dp", bounds_json(dp)}});
  }
  return kOk;
}

int cmd_shape(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Scenario s = load(c, err);
  const auto rep = bisection_shape(s, shaping_options(c));
  print_shaping(out, rep);
  if (c.write_csv) {
    ensure_dir(c.output_dir);
    csv::write(c.output_dir / "shaping_trace.csv", trace_table(rep.bisection));
  }
  if (c.json_summary) {
    ensure_dir(c.output_dir);
    write_json(c.output_dir / "summary.json",
               {{"constants", constants_json(rep.constants)},
                {"qp", bounds_json(rep.qp)},
                {"dp", bounds_json(rep.dp)},
                {"bisection",
                 {{"delta_max", rep.bisection.delta_max},
                  {"lambda_at_delta", rep.bisection.lambda_at_delta},
                  {"status", to_string(rep.bisection.status)},
                  {"iterations", rep.bisection.trace.size()},
                  {"d_rho", rep.d_rho},
                  {"eps_lambda", rep.eps_lambda}}}});
  }
  if (!rep.certified) {
    err << "bisection result is not certified admissible\n";
    return kCertificateFailure;
  }
  return kOk;
}

int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Scenario s = load(c, err);
  const auto sol = load_solution(c.solution_dir.value_or(c.output_dir), s);
  const auto cert = verify_equilibrium(s, sol);
  out << cert.to_string();
  if (!cert.passed()) {
    err << "certificate failed\n";
    return kCertificateFailure;
  }
  return kOk;
}

void markdown_price_table(std::ostream& md, const PriceVector& p) {
  md << "| t | lambda* |\n|---|---|\n";
  for (std::size_t k = 0; k < p.size(); ++k) md << "| " << k << " | " << fixed(p[k], 4) << " |\n";
}

int cmd_report(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Scenario s = load(c, err);
  ensure_dir(c.output_dir);
  const auto shaping = bisection_shape(s, shaping_options(c));
  const SolverOptions so = solver_options(c, false);
  const double delta_dp = shaping.dp.delta_max;
  const double delta_bis = shaping.bisection.delta_max;
  const auto eq_dp = solve_equilibrium(s.with_uniform_preference(delta_dp), so);
  const auto eq_bis = solve_equilibrium(s.with_uniform_preference(delta_bis), so);
  const auto c_t = s.total_supply();

  csv::write(c.output_dir / "bounds.csv", bounds_table(shaping.qp, shaping.dp));
  csv::write(c.output_dir / "shaping_trace.csv", trace_table(shaping.bisection));
  csv::Table supply{{"t", "C"}, {}};
  for (std::size_t k = 0; k < c_t.size(); ++k) supply.add_row({std::to_string(k), format_number(c_t[k])});
  csv::write(c.output_dir / "fig1_supply.csv", supply);
  csv::write(c.output_dir / "fig2_prices.csv", prices_table(eq_dp.prices));
  csv::write(c.output_dir / "fig3_prices.csv", prices_table(eq_bis.prices));

  std::ofstream md(c.output_dir / "summary.md");
  if (!md) throw InputError("cannot write summary.md");
  const auto& k = shaping.constants;
  md << "# Social shaping report\n\n";
  md << "Scenario `" << c.scenario_path.filename().string() << "`: " << s.num_agents()
     << " agents, horizon N = " << s.horizon << ", price cap " << format_number(s.price_cap) << ".\n\n";
  md << "## Scenario constants\n\n| gamma | alpha | beta | rho |\n|---|---|---|---|\n| "
     << format_number(k.gamma) << " | " << format_number(k.alpha) << " | " << format_number(k.beta)
     << " | " << format_number(k.rho) << " |\n\n";
  md << "## Preference bounds\n\n| method | delta_max | full precision |\n|---|---|---|\n";
  md << "| QP (closed form) | " << sig(shaping.qp.delta_max, 2) << " | " << format_number(shaping.qp.delta_max) << " |\n";
  md << "| DP (closed form) | " << sig(shaping.dp.delta_max, 2) << " | " << format_number(shaping.dp.delta_max) << " |\n";
  md << "| bisection | " << sig(delta_bis, 3) << " | " << format_number(delta_bis) << " |\n\n";
  md << "Per-step caps:\n\n| k | cap_qp | cap_dp |\n|---|---|---|\n";
  for (std::size_t i = 0; i < shaping.qp.per_step_caps.size(); ++i) {
    md << "| " << i << " | " << format_number(shaping.qp.per_step_caps[i]) << " | "
       << format_number(shaping.dp.per_step_caps[i]) << " |\n";
  }
  md << "\n## Bisection\n\nStrategy " << shaping.strategy << ", d_rho = " << format_number(shaping.d_rho)
     << ", eps_lambda = " << format_number(shaping.eps_lambda) << ", status "
     << to_string(shaping.bisection.status) << " after " << shaping.bisection.trace.size()
     << " iterations.\n\n";
  if (!shaping.bisection.trace.empty()) {
    md << "lambda_bar(d_rho) = " << fixed(lambda_bar(s, shaping.d_rho, LambdaBarStrategy::parse(c.strategy), so), 1)
       << ", lambda_bar(delta_max) = " << fixed(shaping.bisection.lambda_at_delta, 1) << ".\n\n";
  }
  md << "| k | b | d | L | lambda_bar(L) |\n|---|---|---|---|---|\n";
  for (const auto& st : shaping.bisection.trace) {
    md << "| " << st.k << " | " << format_number(st.b) << " | " << format_number(st.d) << " | "
       << format_number(st.L) << " | " << fixed(st.lambda_at_L, 3) << " |\n";
  }
  md << "\n## Network supply C(t)\n\n| t | C(t) |\n|---|---|\n";
  for (std::size_t i = 0; i < c_t.size(); ++i) md << "| " << i << " | " << fixed(c_t[i], 4) << " |\n";
  md << "\n## Equilibrium prices, Q_i = " << sig(delta_dp, 2) << " I (DP bound)\n\n";
  markdown_price_table(md, eq_dp.prices);
  md << "\nMaximum " << fixed(eq_dp.prices.max(), 4) << " at t = " << argmax(eq_dp.prices) << ".\n";
  md << "\n## Equilibrium prices, Q_i = " << sig(delta_bis, 3) << " I (bisection)\n\n";
  markdown_price_table(md, eq_bis.prices);
  md << "\nMaximum " << fixed(eq_bis.prices.max(), 1) << " at t = " << argmax(eq_bis.prices) << ".\n";
  md.close();

  if (c.json_summary) {
    write_json(c.output_dir / "summary.json",
               {{"constants", constants_json(k)},
                {"qp", bounds_json(shaping.qp)},
                {"dp", bounds_json(shaping.dp)},
                {"bisection",
                 {{"delta_max", delta_bis},
                  {"lambda_at_delta", shaping.bisection.lambda_at_delta},
                  {"status", to_string(shaping.bisection.status)},
                  {"iterations", shaping.bisection.trace.size()}}},
                {"max_price_dp", eq_dp.prices.max()},
                {"max_price_bisection", eq_bis.prices.max()},
                {"certified", shaping.certified}});
  }

  print_shaping(out, shaping);
  out << "wrote " << (c.output_dir / "summary.md").string() << "\n";
  return shaping.certified ? kOk : kCertificateFailure;
}

}  // namespace

void write_solution(const fs::path& dir, const Scenario& s, const EquilibriumSolution& sol) {
  csv::write(dir / "prices.csv", prices_table(sol.prices));
  const std::size_t d = s.agents.front().state_dim();
  const std::size_t m = s.agents.front().input_dim();
  csv::Table t;
  t.header = {"agent", "t"};
  for (std::size_t j = 0; j < d; ++j) t.header.push_back("x" + std::to_string(j));
  for (std::size_t j = 0; j < m; ++j) t.header.push_back("u" + std::to_string(j));
  t.header.insert(t.header.end(), {"consumption", "trade", "slack"});
  for (std::size_t i = 0; i < sol.trajectories.size(); ++i) {
    const auto& traj = sol.trajectories[i];
    for (std::size_t k = 0; k < s.horizon; ++k) {
      std::vector<std::string> row{std::to_string(i), std::to_string(k)};
      for (Eigen::Index j = 0; j < traj.states[k].size(); ++j) row.push_back(format_number(traj.states[k](j)));
      for (Eigen::Index j = 0; j < traj.controls[k].size(); ++j) row.push_back(format_number(traj.controls[k](j)));
      const auto ii = static_cast<Eigen::Index>(i);
      const auto kk = static_cast<Eigen::Index>(k);
      row.push_back(format_number(traj.consumption[k]));
      row.push_back(format_number(sol.trades(ii, kk)));
      row.push_back(format_number(sol.slacks(ii, kk)));
      t.add_row(std::move(row));
    }
  }
  csv::write(dir / "trajectories.csv", t);
}

EquilibriumSolution load_solution(const fs::path& dir, const Scenario& s) {
  const auto prices = csv::read(dir / "prices.csv");
  const auto traj = csv::read(dir / "trajectories.csv");
  const std::size_t n = s.agents.size();
  const std::size_t horizon = s.horizon;
  const auto d = static_cast<Eigen::Index>(s.agents.front().state_dim());
  const auto m = static_cast<Eigen::Index>(s.agents.front().input_dim());
  if (prices.rows.size() != horizon) throw InputError("prices.csv: expected one row per step");
  if (traj.rows.size() != n * horizon) throw InputError("trajectories.csv: expected n * N rows");

  EquilibriumSolution sol;
  sol.prices.values.resize(static_cast<Eigen::Index>(horizon));
  const auto lam_col = prices.column("lambda");
  const auto t_col = prices.column("t");
  for (std::size_t r = 0; r < horizon; ++r) {
    const double t = prices.number(r, t_col);
    if (t != static_cast<double>(r)) throw InputError("prices.csv: rows out of order");
    sol.prices.values(static_cast<Eigen::Index>(r)) = prices.number(r, lam_col);
  }

  sol.trajectories.resize(n);
  sol.trades = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(horizon));
  sol.slacks = sol.trades;
  for (auto& tr : sol.trajectories) {
    tr.states.assign(horizon + 1, Vector::Zero(d));
    tr.controls.assign(horizon, Vector::Zero(m));
    tr.consumption.assign(horizon, 0.0);
  }
  const auto agent_col = traj.column("agent");
  const auto step_col = traj.column("t");
  std::vector<std::vector<bool>> seen(n, std::vector<bool>(horizon, false));
  for (std::size_t r = 0; r < traj.rows.size(); ++r) {
    const double ai = traj.number(r, agent_col);
    const double ki = traj.number(r, step_col);
    if (ai < 0 || ki < 0 || ai >= static_cast<double>(n) || ki >= static_cast<double>(horizon)) {
      throw InputError("trajectories.csv: agent/t index out of range");
    }
    const auto i = static_cast<std::size_t>(ai);
    const auto k = static_cast<std::size_t>(ki);
    if (seen[i][k]) throw InputError("trajectories.csv: duplicate row");
    seen[i][k] = true;
    auto& tr = sol.trajectories[i];
    for (Eigen::Index j = 0; j < d; ++j) tr.states[k](j) = traj.number(r, traj.column("x" + std::to_string(j)));
    for (Eigen::Index j = 0; j < m; ++j) tr.controls[k](j) = traj.number(r, traj.column("u" + std::to_string(j)));
    tr.consumption[k] = traj.number(r, traj.column("consumption"));
    sol.trades(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = traj.number(r, traj.column("trade"));
    sol.slacks(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = traj.number(r, traj.column("slack"));
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& tr = sol.trajectories[i];
    tr.states[horizon] = s.agents[i].A * tr.states[horizon - 1] + s.agents[i].B * tr.controls[horizon - 1];
  }
  const auto c = s.total_supply();
  sol.residuals.resize(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    double demand = 0.0;
    for (const auto& tr : sol.trajectories) demand += tr.consumption[k];
    const double gap = demand - c[k];
    sol.residuals[k] = sol.prices[k] > 0.0 ? std::abs(gap) : std::max(0.0, gap);
  }
  return sol;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.subcommand == "validate") return cmd_validate(config, out, err);
    if (config.subcommand == "equilibrium") return cmd_equilibrium(config, out, err);
    if (config.subcommand == "bounds") return cmd_bounds(config, out, err);
    if (config.subcommand == "shape") return cmd_shape(config, out, err);
    if (config.subcommand == "verify") return cmd_verify(config, out, err);
    if (config.subcommand == "report") return cmd_report(config, out, err);
    err << "unknown subcommand '" << config.subcommand << "'\n";
    return kInvalidInput;
  } catch (const InvalidScenario& e) {
    err << e.what();
    return kInvalidInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const Error& e) {
    // SolverFailure, ShapingError, NumericalError
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }
}

}  // namespace socshape::cli
