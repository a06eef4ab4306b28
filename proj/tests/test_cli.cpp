#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "socshape/cli.hpp"
#include "socshape/csv.hpp"
#include "support.hpp"

using namespace socshape;
using namespace socshape::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("socshape_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(const cli::RunConfig& cfg) {
  std::ostringstream out, err;
  const int code = cli::run(cfg, out, err);
  return {code, out.str(), err.str()};
}

cli::RunConfig config(const std::string& sub, const fs::path& scenario, const fs::path& out) {
  cli::RunConfig cfg;
  cfg.subcommand = sub;
  cfg.scenario_path = scenario;
  cfg.output_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("validate") {
  const auto dir = scratch("validate");
  CHECK(invoke(config("validate", example1_path(), dir)).code == cli::kOk);
  const auto bad = invoke(config("validate", source_dir() / "tests/data/zero_supply_t2.json", dir));
  CHECK(bad.code == cli::kInvalidInput);
  CHECK(bad.err.find("t = 2") != std::string::npos);
  CHECK(invoke(config("validate", dir / "missing.json", dir)).code == cli::kInvalidInput);
}

TEST_CASE("equilibrium on zero initial states") {
  const auto dir = scratch("zero");
  const auto r = invoke(config("equilibrium", source_dir() / "scenarios/zero_state.json", dir));
  REQUIRE(r.code == cli::kOk);
  const auto prices = csv::read(dir / "prices.csv");
  CHECK(prices.header == std::vector<std::string>{"t", "lambda"});
  REQUIRE(prices.rows.size() == 6);
  for (std::size_t r2 = 0; r2 < 6; ++r2) CHECK(prices.number(r2, 1) == 0.0);
  CHECK(fs::exists(dir / "trajectories.csv"));
  CHECK(fs::exists(dir / "residuals.csv"));
}

TEST_CASE("equilibrium then verify round-trips") {
  const auto dir = scratch("roundtrip");
  const auto eq = invoke(config("equilibrium", example1_path(), dir));
  REQUIRE(eq.code == cli::kOk);
  const auto prices = csv::read(dir / "prices.csv");
  CHECK(prices.number(1, 1) == doctest::Approx(29.9887).epsilon(1e-4));
  CHECK(invoke(config("verify", example1_path(), dir)).code == cli::kOk);

  // A tampered price no longer certifies.
  auto table = csv::read(dir / "prices.csv");
  table.rows[1][1] = csv::format_number(table.number(1, 1) + 1.0);
  csv::write(dir / "prices.csv", table);
  const auto tampered = invoke(config("verify", example1_path(), dir));
  CHECK(tampered.code == cli::kCertificateFailure);
}

TEST_CASE("outputs are byte-identical across runs") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(invoke(config("equilibrium", example1_path(), dir)).code == cli::kOk);
    REQUIRE(invoke(config("bounds", example1_path(), dir)).code == cli::kOk);
  }
  for (const char* name : {"prices.csv", "trajectories.csv", "residuals.csv", "bounds.csv"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

TEST_CASE("bounds and shape outputs") {
  const auto dir = scratch("shape");
  REQUIRE(invoke(config("bounds", example1_path(), dir)).code == cli::kOk);
  const auto bounds = csv::read(dir / "bounds.csv");
  CHECK(bounds.header == std::vector<std::string>{"k", "cap_qp", "cap_dp"});
  CHECK(bounds.rows.size() == 6);

  auto cfg = config("shape", example1_path(), dir);
  cfg.d_rho = 1.0;
  cfg.max_iters = 20;
  const auto r = invoke(cfg);
  REQUIRE(r.code == cli::kOk);
  const auto trace = csv::read(dir / "shaping_trace.csv");
  CHECK(trace.header == std::vector<std::string>{"k", "b", "d", "L", "lambda_at_L"});
  CHECK_FALSE(trace.rows.empty());
  const double last_l = trace.number(trace.rows.size() - 1, 3);
  CHECK(last_l >= 0.197);
  CHECK(last_l <= 0.207);

  cfg.d_rho = 0.05;
  CHECK(invoke(cfg).code == cli::kInvalidInput);
}

TEST_CASE("report") {
  const auto dir = scratch("report");
  auto cfg = config("report", example1_path(), dir);
  cfg.d_rho = 1.0;
  cfg.max_iters = 20;
  cfg.json_summary = true;
  REQUIRE(invoke(cfg).code == cli::kOk);
  const auto md = slurp(dir / "summary.md");
  CHECK(md.find("| QP (closed form) | 0.00055 |") != std::string::npos);
  CHECK(md.find("| DP (closed form) | 0.0010 |") != std::string::npos);
  CHECK(md.find("| bisection | 0.202 |") != std::string::npos);
  for (const char* name : {"bounds.csv", "shaping_trace.csv", "fig1_supply.csv", "fig2_prices.csv",
                           "fig3_prices.csv", "summary.json"}) {
    CHECK(fs::exists(dir / name));
  }
}

TEST_CASE("bad arguments map to exit code 1") {
  const auto dir = scratch("badargs");
  auto cfg = config("shape", example1_path(), dir);
  cfg.strategy = "corner";
  CHECK(invoke(cfg).code == cli::kInvalidInput);
  cfg = config("equilibrium", example1_path(), dir);
  cfg.tol = -1.0;
  CHECK(invoke(cfg).code == cli::kInvalidInput);
  CHECK(invoke(config("frobnicate", example1_path(), dir)).code == cli::kInvalidInput);
}

TEST_CASE("solver failure maps to exit code 2") {
  const auto dir = scratch("fail");
  auto cfg = config("equilibrium", example1_path(), dir);
  cfg.q = 1.0;
  cfg.max_iters = 1;
  cfg.tol = 1e-300;
  const auto r = invoke(cfg);
  CHECK(r.code == cli::kSolverFailure);
}

TEST_CASE("csv number format") {
  CHECK(csv::format_number(0.0) == "0");
  CHECK(csv::format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(csv::format_number(148.64312345678) == "148.643123457");
}
