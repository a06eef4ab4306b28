#include "socshape/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace socshape {

namespace linalg {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double quadratic_form(const Matrix& m, const Vector& v) { return v.dot(m * v); }

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols() || m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace linalg

std::vector<double> Scenario::total_supply() const {
  std::vector<double> c(horizon, 0.0);
  for (const auto& agent : agents) {
    for (std::size_t t = 0; t < horizon && t < agent.supply.size(); ++t) c[t] += agent.supply[t];
  }
  return c;
}

Scenario Scenario::with_scalar_preferences(const std::vector<double>& q) const {
  if (q.size() != agents.size()) {
    throw PreconditionError("with_scalar_preferences: expected one q per agent");
  }
  Scenario out = *this;
  for (std::size_t i = 0; i < out.agents.size(); ++i) {
    const auto d = static_cast<Eigen::Index>(out.agents[i].state_dim());
    out.agents[i].Q = q[i] * Matrix::Identity(d, d);
  }
  return out;
}

Scenario Scenario::with_uniform_preference(double q) const {
  return with_scalar_preferences(std::vector<double>(agents.size(), q));
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations) {
    if (v.agent >= 0) os << "agent " << v.agent << ": ";
    os << v.field << ": " << v.message << "\n";
  }
  return os.str();
}

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void check_spd(const Matrix& m, int agent, const char* name, ValidationReport& r) {
  if (linalg::asymmetry(m) > 1e-8) {
    r.violations.push_back({agent, name, std::string(name) + " not symmetric"});
  }
  const double lmin = linalg::min_eigenvalue(m);
  if (!(lmin > kPdTolerance)) {
    std::ostringstream os;
    os << name << " not positive definite (smallest eigenvalue " << lmin << ")";
    r.violations.push_back({agent, name, os.str()});
  }
}

bool has_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  return m.rows() == rows && m.cols() == cols;
}

}  // namespace

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport r;
  if (s.agents.empty()) r.violations.push_back({-1, "agents", "at least one agent required"});
  if (s.horizon < 1) r.violations.push_back({-1, "horizon", "horizon must be >= 1"});
  if (!(s.price_cap > 0.0) || !std::isfinite(s.price_cap)) {
    r.violations.push_back({-1, "price_cap", "price cap must be positive"});
  }
  if (!r.valid()) return r;

  const Eigen::Index d = s.agents.front().A.rows();
  const Eigen::Index m = s.agents.front().B.cols();
  for (std::size_t idx = 0; idx < s.agents.size(); ++idx) {
    const auto& a = s.agents[idx];
    const int i = static_cast<int>(idx);
    const std::size_t before = r.violations.size();
    if (!has_shape(a.A, d, d)) r.violations.push_back({i, "A", "A must be d x d with shared d"});
    if (!has_shape(a.B, d, m)) r.violations.push_back({i, "B", "B must be d x m with shared (d, m)"});
    if (!has_shape(a.H, m, m)) r.violations.push_back({i, "H", "H must be m x m"});
    if (!has_shape(a.R, m, m)) r.violations.push_back({i, "R", "R must be m x m"});
    if (!has_shape(a.Q, d, d)) r.violations.push_back({i, "Q", "Q must be d x d"});
    if (a.x0.size() != d) r.violations.push_back({i, "x0", "x0 must have length d"});
    if (a.supply.size() != s.horizon) {
      r.violations.push_back({i, "supply", "supply must have length N"});
    }
    if (r.violations.size() != before) continue;

    for (const auto* mat : {&a.A, &a.B, &a.H, &a.R, &a.Q}) {
      if (!all_finite(*mat)) {
        r.violations.push_back({i, "matrix", "non-finite matrix entry"});
        break;
      }
    }
    if (!a.x0.allFinite()) r.violations.push_back({i, "x0", "non-finite entry"});
    check_spd(a.H, i, "H", r);
    check_spd(a.R, i, "R", r);
    check_spd(a.Q, i, "Q", r);
    for (std::size_t t = 0; t < a.supply.size(); ++t) {
      if (!(a.supply[t] >= 0.0) || !std::isfinite(a.supply[t])) {
        std::ostringstream os;
        os << "supply negative or non-finite at t = " << t;
        r.violations.push_back({i, "supply", os.str()});
      }
    }
  }

  const auto c = s.total_supply();
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!(c[t] > 0.0)) {
      std::ostringstream os;
      os << "C(t) not positive at t = " << t;
      r.violations.push_back({-1, "supply", os.str()});
    }
  }

  const auto& o = s.constants_override;
  for (const auto& [name, value] : {std::pair{"gamma", o.gamma}, std::pair{"alpha", o.alpha},
                                    std::pair{"beta", o.beta}, std::pair{"rho", o.rho}}) {
    if (value && !(*value > 0.0)) {
      r.violations.push_back({-1, std::string("constants.") + name, "override must be positive"});
    }
  }
  return r;
}

ScenarioConstants tight_constants(const Scenario& s) {
  auto report = validate_scenario(s);
  if (!report.valid()) throw InvalidScenario(std::move(report));
  ScenarioConstants c;
  c.rho = std::numeric_limits<double>::infinity();
  for (const auto& a : s.agents) {
    c.gamma = std::max(c.gamma, a.x0.norm());
    c.alpha = std::max(c.alpha, linalg::spectral_norm(a.A));
    c.beta = std::max(c.beta, linalg::spectral_norm(a.B));
    c.rho = std::min(c.rho, linalg::min_eigenvalue(a.H));
  }
  return c;
}

ScenarioConstants scenario_constants(const Scenario& s) {
  ScenarioConstants c = tight_constants(s);
  const auto& o = s.constants_override;
  if (o.gamma) c.gamma = *o.gamma;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.beta) c.beta = *o.beta;
  if (o.rho) c.rho = *o.rho;
  return c;
}

}  // namespace socshape
