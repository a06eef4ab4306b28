#include <cmath>
#include <random>

#include "doctest.h"
#include "socshape/equilibrium.hpp"
#include "support.hpp"

using namespace socshape;
using namespace socshape::testing;

namespace {

Scenario zero_state_example() {
  Scenario s = example1(0.202);
  for (auto& a : s.agents) a.x0.setZero();
  return s;
}

// One agent, A = 0.5, B = H = R = Q = 1, x0 = 1, N = 1, C(0) = 0.01.
// u(0) = -0.5 / (2 + lambda), so the clearing price solves 0.25 / (2 + l)^2 = 0.01.
Scenario scalar_clearing_instance() {
  Scenario s;
  s.horizon = 1;
  s.price_cap = 10.0;
  s.agents.push_back(scalar_agent(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, {0.01}));
  return s;
}

std::size_t argmax(const PriceVector& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

}  // namespace

TEST_CASE("excess_demand") {
  SUBCASE("zero state gives -C") {
    const Scenario s = zero_state_example();
    const Vector d = excess_demand(s, PriceVector::constant(6, 2.0));
    const auto c = s.total_supply();
    for (std::size_t t = 0; t < 6; ++t) CHECK(d(static_cast<Eigen::Index>(t)) == -c[t]);
  }
  SUBCASE("scalar closed form") {
    const Scenario s = scalar_clearing_instance();
    for (double lam : {0.0, 1.0, 3.0, 7.5}) {
      const double expected = 0.25 / ((2.0 + lam) * (2.0 + lam)) - 0.01;
      CHECK(excess_demand(s, PriceVector(vec({lam})))(0) == doctest::Approx(expected).epsilon(1e-13));
    }
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(excess_demand(scalar_clearing_instance(), PriceVector(vec({1.0, 2.0}))),
                    PreconditionError);
  }
}

TEST_CASE("fischer_burmeister zero set") {
  CHECK(fischer_burmeister(0.0, 3.0) == 0.0);
  CHECK(fischer_burmeister(2.0, 0.0) == 0.0);
  CHECK(fischer_burmeister(1.0, 1.0) == doctest::Approx(2.0 - std::sqrt(2.0)));
  CHECK(fischer_burmeister(-1.0, 2.0) < 0.0);
  CHECK(fischer_burmeister(1e8, 1e-8) == doctest::Approx(1e-8).epsilon(1e-6));
}

TEST_CASE("solve_equilibrium on the scalar instance hits lambda = 3") {
  const auto sol = solve_equilibrium(scalar_clearing_instance());
  CHECK(sol.prices[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sol.trades(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(verify_equilibrium(scalar_clearing_instance(), sol).passed());
}

TEST_CASE("zero initial states: zero prices after the zero-price check") {
  const Scenario s = zero_state_example();
  const auto sol = solve_equilibrium(s);
  REQUIRE(sol.trace.size() == 1);
  CHECK(sol.trace.front().phase == SolverIterate::Phase::ZeroPrice);
  CHECK(sol.prices.values.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& traj : sol.trajectories) CHECK(stack_controls(traj.controls).norm() == 0.0);
  for (Eigen::Index t = 0; t < 6; ++t) CHECK(std::abs(sol.trades.col(t).sum()) <= 1e-12);
  // Proportional slack split: with nothing consumed every agent keeps its own supply.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(sol.slacks(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) ==
            doctest::Approx(s.agents[i].supply[t]));
    }
  }
}

TEST_CASE("example1 at Q = 0.202 I") {
  const Scenario s = example1(0.202);
  const auto sol = solve_equilibrium(s);
  CHECK(argmax(sol.prices) == 1);
  CHECK(sol.prices.max() >= 29.9);
  CHECK(sol.prices.max() <= 30.1);
  const Vector d = excess_demand(s, sol.prices);
  const auto c = s.total_supply();
  for (std::size_t k = 0; k < 6; ++k) {
    if (sol.prices[k] > 0.0) CHECK(std::abs(d(static_cast<Eigen::Index>(k))) <= 1e-6 * c[k]);
  }
  const auto cert = verify_equilibrium(s, sol);
  INFO(cert.to_string());
  CHECK(cert.passed());
  // Agent 3 has no local supply, so it buys what it consumes.
  CHECK(sol.trades(2, 1) < 0.0);
  CHECK(sol.trades(2, 1) == doctest::Approx(-sol.trajectories[2].consumption[1]));

  // Newton acceptance: strictly decreasing residual between accepted iterates.
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& it : sol.trace) {
    if (it.phase != SolverIterate::Phase::Newton) continue;
    CHECK(it.residual_norm < prev);
    prev = it.residual_norm;
  }
}

TEST_CASE("example1 at Q = 0.001 I: low prices and zero-price steps") {
  const Scenario s = example1(0.001);
  const auto sol = solve_equilibrium(s);
  for (std::size_t k = 0; k < 6; ++k) CHECK(sol.prices[k] <= 30.0);
  CHECK(sol.prices.max() < 3.0);
  const auto cert = verify_equilibrium(s, sol);
  INFO(cert.to_string());
  CHECK(cert.passed());
  bool saw_zero = false;
  for (Eigen::Index t = 0; t < 6; ++t) {
    if (sol.prices.values(t) == 0.0) {
      saw_zero = true;
      CHECK(sol.slacks.col(t).sum() > 0.0);
    } else {
      CHECK(sol.slacks.col(t).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(std::abs(sol.trades.col(t).sum()) <= 1e-7);
  }
  CHECK(saw_zero);
}

TEST_CASE("trading_decisions") {
  SUBCASE("positive prices sell the whole surplus") {
    const Scenario s = example1(0.5);
    const PriceVector p = PriceVector::constant(6, 4.0);
    const auto traj = best_responses(s, p);
    const auto td = trading_decisions(s, p, traj);
    CHECK(td.slacks.cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t t = 0; t < 6; ++t) {
        CHECK(td.trades(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) ==
              doctest::Approx(s.agents[i].supply[t] - traj[i].consumption[t]));
      }
    }
  }
  SUBCASE("two identical agents trade nothing") {
    Scenario s;
    s.horizon = 3;
    s.price_cap = 5.0;
    const auto a = scalar_agent(0.8, 1.0, 0.5, 0.2, 1.0, 2.0, {1.0, 1.5, 0.7});
    s.agents = {a, a};
    for (double supply_scale : {0.05, 1.0, 20.0}) {
      Scenario t = s;
      for (auto& ag : t.agents) {
        for (auto& v : ag.supply) v *= supply_scale;
      }
      const auto sol = solve_equilibrium(t);
      CHECK(sol.trades.cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("negative surplus at a zero-price step is an internal error") {
    const Scenario s = example1(1.0);
    const PriceVector p = PriceVector::constant(6, 0.0);
    CHECK_THROWS_AS(trading_decisions(s, p, best_responses(s, p)), NumericalError);
  }
}

TEST_CASE("verify_equilibrium catches broken certificates") {
  const Scenario s = example1(0.202);
  const auto sol = solve_equilibrium(s);

  EquilibriumSolution price_only = sol;
  price_only.prices.values(1) += 1.0;
  const auto r1 = verify_equilibrium(s, price_only);
  CHECK_FALSE(r1.passed());
  CHECK_FALSE(r1.find("stationarity")->passed);

  // Re-solving the agents at the perturbed price breaks market clearing at t = 1.
  EquilibriumSolution resolved = price_only;
  resolved.trajectories = best_responses(s, resolved.prices);
  const auto td = trading_decisions(s, resolved.prices, resolved.trajectories);
  resolved.trades = td.trades;
  resolved.slacks = td.slacks;
  const auto r2 = verify_equilibrium(s, resolved);
  const auto* balance = r2.find("balance");
  REQUIRE(balance);
  CHECK_FALSE(balance->passed);
  CHECK(balance->detail.find("t = 1") != std::string::npos);
}

TEST_CASE("fallback path reproduces the Newton answer") {
  const Scenario s = example1(0.202);
  const auto newton = solve_equilibrium(s);
  SolverOptions opts;
  opts.damping = 1e-9;  // Newton crawls and exhausts its iterations
  opts.max_iters = 50;
  const auto fb = solve_equilibrium(s, opts);
  CHECK(fb.used_fallback);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(fb.prices[k] == doctest::Approx(newton.prices[k]).epsilon(1e-6));
  }
  CHECK(verify_equilibrium(s, fb).passed());
}

TEST_CASE("solver failure carries trace and best iterate") {
  SolverOptions opts;
  opts.max_iters = 1;
  opts.fallback = false;
  try {
    solve_equilibrium(example1(1.0), opts);
    FAIL("expected SolverFailure");
  } catch (const SolverFailure& e) {
    CHECK_FALSE(e.trace().empty());
    CHECK(e.best_iterate().size() == 6);
  }
  SolverOptions bad;
  bad.tol_residual = 0.0;
  CHECK_THROWS_AS(solve_equilibrium(example1(), bad), PreconditionError);
  bad = {};
  bad.max_iters = 0;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("invalid scenario is rejected") {
  Scenario s = example1();
  s.agents[0].R = -s.agents[0].R;
  CHECK_THROWS_AS(solve_equilibrium(s), InvalidScenario);
}

TEST_CASE("scalar excess demand is non-increasing in its own price") {
  std::mt19937_64 rng(31);
  RandomScenarioSpec spec;
  spec.scalar = true;
  std::uniform_real_distribution<double> price(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Scenario s = random_scenario(rng, spec);
    Vector p(static_cast<Eigen::Index>(s.horizon));
    for (auto& v : p) v = price(rng);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      double prev = std::numeric_limits<double>::infinity();
      for (int g = 0; g <= 20; ++g) {
        Vector q = p;
        q(k) = 0.5 * g;
        const double dk = excess_demand(s, PriceVector(q))(k);
        CHECK(dk <= prev + 1e-12);
        prev = dk;
      }
    }
  }
}

TEST_CASE("random scenarios produce valid certificates") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> supply_scale(0.05, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    Scenario s = random_scenario(rng);
    // Shrink supplies on some instances so that prices bind.
    const double scale = supply_scale(rng);
    for (auto& a : s.agents) {
      for (auto& v : a.supply) v *= scale;
    }
    const auto sol = solve_equilibrium(s);
    const auto cert = verify_equilibrium(s, sol);
    INFO("trial ", trial, "\n", cert.to_string());
    CHECK(cert.passed());
    const double rho = tight_constants(s).rho;
    const auto c = s.total_supply();
    for (const auto& traj : sol.trajectories) {
      for (std::size_t t = 0; t < s.horizon; ++t) {
        CHECK(traj.controls[t].norm() <= std::sqrt(c[t] / rho) * (1.0 + 1e-9));
      }
    }
  }
}
