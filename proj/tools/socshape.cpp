// socshape: equilibrium pricing and preference shaping for quadratic
// multi-agent resource markets.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "socshape/cli.hpp"

int main(int argc, char** argv) {
  using socshape::cli::RunConfig;
  RunConfig config;
  CLI::App app{"Competitive-equilibrium pricing and social shaping for quadratic multi-agent markets"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = ".";
  std::string solution_dir;
  double tol = 0.0, q = 0.0, d_rho = 0.0, eps_lambda = 0.0;
  int max_iters = 0;
  std::string strategy = "boundary";
  bool json = false;
  bool no_csv = false;

  const std::pair<const char*, const char*> subcommands[] = {
      {"validate", "Check a scenario file against the model assumptions"},
      {"equilibrium", "Solve for competitive-equilibrium prices and write CSVs"},
      {"bounds", "Closed-form preference bounds (QP and DP)"},
      {"shape", "Bisection search for the largest admissible preference bound"},
      {"verify", "Re-check a previously written equilibrium solution"},
      {"report", "Run everything and write summary.md"},
  };
  for (const auto& [name, help] : subcommands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--tol", tol, "Equilibrium residual tolerance (relative to C(t))");
    sub->add_option("--max-iters", max_iters,
                    "Iteration cap: Newton iterations (equilibrium) or bisection steps (shape, report)");
    sub->add_option("--d-rho", d_rho, "Initial upper bracket of the bisection");
    sub->add_option("--eps-lambda", eps_lambda, "Bisection price tolerance");
    sub->add_option("--strategy", strategy, "boundary | grid:<g>");
    sub->add_option("--q", q, "Override every Q_i with q I");
    sub->add_option("--solution", solution_dir, "Directory with prices.csv/trajectories.csv (verify)");
    sub->add_flag("--json", json, "Also write summary.json");
    sub->add_flag("--no-csv", no_csv, "Skip CSV output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : socshape::cli::kInvalidInput;
  }

  const auto* sub = app.get_subcommands().front();
  config.subcommand = sub->get_name();
  config.scenario_path = scenario;
  config.output_dir = out_dir;
  if (sub->count("--solution")) config.solution_dir = solution_dir;
  if (sub->count("--tol")) config.tol = tol;
  if (sub->count("--max-iters")) config.max_iters = max_iters;
  if (sub->count("--q")) config.q = q;
  if (sub->count("--d-rho")) config.d_rho = d_rho;
  if (sub->count("--eps-lambda")) config.eps_lambda = eps_lambda;
  config.strategy = strategy;
  config.json_summary = json;
  config.write_csv = !no_csv;
  return socshape::cli::run(config, std::cout, std::cerr);
}
