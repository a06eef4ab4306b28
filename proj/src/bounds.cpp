#include "socshape/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace socshape {

const char* to_string(BoundMethod method) { return method == BoundMethod::QP ? "QP" : "DP"; }

namespace {

/// alpha^0 .. alpha^max_exp by repeated multiplication; alpha^0 is 1 even
/// when alpha is 0.
std::vector<long double> powers(double alpha, std::size_t max_exp) {
  std::vector<long double> p(max_exp + 1);
  p[0] = 1.0L;
  for (std::size_t e = 1; e <= max_exp; ++e) p[e] = p[e - 1] * static_cast<long double>(alpha);
  return p;
}

BoundReport compute(const Scenario& s, BoundMethod method) {
  BoundReport rep;
  rep.method = method;
  rep.constants = scenario_constants(s);
  const auto& k = rep.constants;
  const std::size_t horizon = s.horizon;
  const auto c = s.total_supply();
  const auto pw = powers(k.alpha, 2 * horizon);
  const long double n = static_cast<long double>(s.agents.size());
  const long double gamma = k.gamma;
  const long double beta = k.beta;
  const long double rho = k.rho;

  std::vector<long double> u_bound(horizon);
  for (std::size_t j = 0; j < horizon; ++j) u_bound[j] = std::sqrt(static_cast<long double>(c[j]) / rho);

  rep.per_step_caps.resize(horizon);
  for (std::size_t step = 0; step < horizon; ++step) {
    long double denom = 0.0L;
    for (std::size_t t = step + 1; t <= horizon; ++t) {
      denom += gamma * pw[2 * t - step - 1];
      const std::size_t j_end = method == BoundMethod::QP ? t : step;
      long double cross = 0.0L;
      for (std::size_t j = 0; j < j_end; ++j) {
        if (method == BoundMethod::QP && j == step) continue;
        cross += u_bound[j] * pw[2 * t - j - step - 2];
      }
      denom += beta * cross;
    }
    const long double rhs = std::sqrt(static_cast<long double>(c[step]) * rho) *
                            static_cast<long double>(s.price_cap) / (n * beta);
    rep.per_step_caps[step] = denom > 0.0L ? static_cast<double>(rhs / denom)
                                           : std::numeric_limits<double>::infinity();
  }
  rep.delta_max = *std::min_element(rep.per_step_caps.begin(), rep.per_step_caps.end());
  if (k.alpha == 0.0) rep.notes = "alpha = 0: powers use the convention 0^0 = 1";
  return rep;
}

}  // namespace

BoundReport delta_max_qp(const Scenario& s) { return compute(s, BoundMethod::QP); }
BoundReport delta_max_dp(const Scenario& s) { return compute(s, BoundMethod::DP); }

}  // namespace socshape
