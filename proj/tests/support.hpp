#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "socshape/core.hpp"
#include "socshape/lqr.hpp"

namespace socshape::testing {

inline std::filesystem::path source_dir() { return SOCSHAPE_SOURCE_DIR; }
inline std::filesystem::path example1_path() { return source_dir() / "scenarios" / "example1.json"; }

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v(k++) = x;
  return v;
}

/// The three-agent, six-step example, built in code independently of the
/// shipped JSON file.
inline Scenario example1(double q = 0.202) {
  Scenario s;
  s.horizon = 6;
  s.price_cap = 30.0;
  const Matrix R = 0.05 * Matrix::Identity(2, 2);
  auto supply = [](double amp, double offset) {
    std::vector<double> a(6);
    for (int t = 0; t < 6; ++t) a[t] = amp * std::sin(std::numbers::pi * t / 6.0) + offset;
    return a;
  };
  s.agents.push_back({mat({{-0.6, -0.1, 0.2}, {0.3, -0.7, 0.2}, {0.2, -0.3, 0.8}}),
                      mat({{2, 1}, {1, 7}, {1, 6}}), mat({{5, 1}, {1, 8}}), R,
                      q * Matrix::Identity(3, 3), vec({10, 40, 70}), supply(1.0, 1.2)});
  s.agents.push_back({mat({{0.5, 0.1, -0.1}, {0.3, -0.2, -0.2}, {-0.2, 0.3, -0.3}}),
                      mat({{4, 1}, {1, 6}, {3, 4}}), mat({{3, 2}, {2, 7}}), R,
                      q * Matrix::Identity(3, 3), vec({20, 50, 80}), supply(2.0, 2.2)});
  s.agents.push_back({mat({{-0.4, 0.2, 0.2}, {-0.3, 0.8, 0.2}, {0.2, 0.3, -0.5}}),
                      mat({{9, 2}, {2, 3}, {4, 5}}), mat({{2, -1}, {-1, 1}}), R,
                      q * Matrix::Identity(3, 3), vec({30, 60, 90}), std::vector<double>(6, 0.0)});
  return s;
}

inline AgentModel scalar_agent(double a, double b, double q, double r, double h, double x0,
                               std::vector<double> supply) {
  return {mat({{a}}), mat({{b}}), mat({{h}}), mat({{r}}), mat({{q}}), vec({x0}), std::move(supply)};
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                            double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index dim, double floor) {
  const Matrix g = random_matrix(rng, dim, dim, -1.0, 1.0);
  return g * g.transpose() + floor * Matrix::Identity(dim, dim);
}

struct RandomScenarioSpec {
  std::size_t max_agents = 3;
  std::size_t max_horizon = 6;
  std::size_t max_state = 3;
  std::size_t max_input = 2;
  double max_a_norm = 1.2;
  bool scalar = false;
};

/// Desk-scale random scenario with positive supply at every step. The price
/// cap is left at 1 and is usually re-set by the caller.
inline Scenario random_scenario(std::mt19937_64& rng, const RandomScenarioSpec& spec = {}) {
  std::uniform_int_distribution<std::size_t> agents(1, spec.max_agents);
  std::uniform_int_distribution<std::size_t> horizon(1, spec.max_horizon);
  std::uniform_int_distribution<std::size_t> state(1, spec.max_state);
  std::uniform_int_distribution<std::size_t> input(1, spec.max_input);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scenario s;
  s.horizon = horizon(rng);
  s.price_cap = 1.0;
  const auto n = agents(rng);
  const auto d = static_cast<Eigen::Index>(spec.scalar ? 1 : state(rng));
  const auto m = static_cast<Eigen::Index>(spec.scalar ? 1 : input(rng));
  for (std::size_t i = 0; i < n; ++i) {
    AgentModel a;
    a.A = random_matrix(rng, d, d, -1.0, 1.0);
    const double target = (0.2 + 0.8 * unit(rng)) * spec.max_a_norm;
    a.A *= target / std::max(1e-12, linalg::spectral_norm(a.A));
    a.B = random_matrix(rng, d, m, -2.0, 2.0);
    a.H = random_spd(rng, m, 0.3);
    a.R = (0.02 + 0.3 * unit(rng)) * Matrix::Identity(m, m);
    a.Q = (0.05 + unit(rng)) * Matrix::Identity(d, d);
    a.x0 = random_matrix(rng, d, 1, -10.0, 10.0);
    a.supply.resize(s.horizon);
    for (auto& v : a.supply) v = 0.2 + 2.0 * unit(rng);
    s.agents.push_back(std::move(a));
  }
  return s;
}

/// Central finite-difference gradient of f at x.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double step) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector hi = x, lo = x;
    hi(j) += step;
    lo(j) -= step;
    g(j) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

/// Agent objective evaluated by the explicit state expansion
/// x(t) = A^t x0 + sum_j A^(t-j-1) B u(j), independent of the rollout code.
inline double objective_by_expansion(const AgentModel& a, const Vector& prices, const Vector& stacked) {
  const auto m = a.B.cols();
  const auto n = prices.size();
  double value = 0.0;
  Matrix at = Matrix::Identity(a.A.rows(), a.A.rows());
  for (Eigen::Index t = 0; t <= n; ++t) {
    Vector x = at * a.x0;
    for (Eigen::Index j = 0; j < t; ++j) {
      Matrix p = Matrix::Identity(a.A.rows(), a.A.rows());
      for (Eigen::Index e = 0; e < t - j - 1; ++e) p = p * a.A;
      x += p * a.B * stacked.segment(j * m, m);
    }
    value -= x.dot(a.Q * x);
    if (t < n) {
      const Vector u = stacked.segment(t * m, m);
      value -= u.dot((a.R + prices(t) * a.H) * u);
      value += prices(t) * a.supply[static_cast<std::size_t>(t)];
    }
    at = at * a.A;
  }
  return value;
}

inline bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace socshape::testing
