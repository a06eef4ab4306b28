#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "socshape/equilibrium.hpp"

namespace socshape::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalidInput = 1,
  kSolverFailure = 2,
  kCertificateFailure = 3,
};

struct RunConfig {
  /// validate | equilibrium | bounds | shape | verify | report
  std::string subcommand;
  std::filesystem::path scenario_path;
  std::filesystem::path output_dir = ".";
  /// Directory holding prices.csv / trajectories.csv for `verify`;
  /// defaults to output_dir.
  std::optional<std::filesystem::path> solution_dir;

  std::optional<double> tol;
  std::optional<int> max_iters;
  /// Replace every Q_i by q I before solving (equilibrium / verify).
  std::optional<double> q;

  std::optional<double> d_rho;
  std::optional<double> eps_lambda;
  std::string strategy = "boundary";

  bool write_csv = true;
  bool json_summary = false;
};

/// Executes one subcommand; diagnostics go to `err`, summaries to `out`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

void write_solution(const std::filesystem::path& dir, const Scenario& s,
                    const EquilibriumSolution& sol);
/// Rebuilds a solution from prices.csv and trajectories.csv; x(N) is
/// propagated from the last stored state and control.
EquilibriumSolution load_solution(const std::filesystem::path& dir, const Scenario& s);

}  // namespace socshape::cli
