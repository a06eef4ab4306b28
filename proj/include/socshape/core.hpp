#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "socshape/errors.hpp"

namespace socshape {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerance on the smallest eigenvalue when testing positive definiteness.
inline constexpr double kPdTolerance = 1e-10;

/// One agent: linear dynamics x(t+1) = A x(t) + B u(t), consumption
/// h(u) = u' H u, running utility -x'Qx - u'Ru, terminal utility -x'Qx,
/// and a local supply sequence a(t).
struct AgentModel {
  Matrix A;
  Matrix B;
  Matrix H;
  Matrix R;
  Matrix Q;
  Vector x0;
  std::vector<double> supply;

  std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(B.cols()); }
};

/// Optional user-supplied replacements for the tightest-from-data constants.
struct ConstantsOverride {
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> rho;
};

struct Scenario {
  std::vector<AgentModel> agents;
  std::size_t horizon = 0;
  double price_cap = 0.0;
  ConstantsOverride constants_override;

  std::size_t num_agents() const { return agents.size(); }
  /// C(t) = sum_i a_i(t).
  std::vector<double> total_supply() const;
  /// Copy of the scenario with every Q_i replaced by q_i * I.
  Scenario with_scalar_preferences(const std::vector<double>& q) const;
  /// Copy with Q_i = q * I for all agents.
  Scenario with_uniform_preference(double q) const;
};

/// Price trajectory lambda_0 .. lambda_{N-1}.
struct PriceVector {
  Vector values;

  PriceVector() = default;
  explicit PriceVector(Vector v) : values(std::move(v)) {}
  static PriceVector constant(std::size_t horizon, double value) {
    return PriceVector(Vector::Constant(static_cast<Eigen::Index>(horizon), value));
  }
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  double operator[](std::size_t t) const { return values(static_cast<Eigen::Index>(t)); }
  double max() const { return values.size() ? values.maxCoeff() : 0.0; }
};

struct Violation {
  /// Agent index, or -1 for scenario-level violations.
  int agent = -1;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
  std::string to_string() const;
};

/// Thrown by operations that require a valid scenario.
class InvalidScenario : public Error {
 public:
  explicit InvalidScenario(ValidationReport report)
      : Error("invalid scenario:\n" + report.to_string()), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Uniform bounds over the agent population: ||x_i(0)|| <= gamma,
/// ||A_i|| <= alpha, ||B_i|| <= beta, H_i >= rho I.
struct ScenarioConstants {
  double gamma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
};

ValidationReport validate_scenario(const Scenario& s);

/// Tightest constants from the data, with any scenario override applied.
/// Throws InvalidScenario.
ScenarioConstants scenario_constants(const Scenario& s);
/// Tightest constants, ignoring overrides.
ScenarioConstants tight_constants(const Scenario& s);

namespace linalg {

/// Largest singular value, via the eigenvalues of M'M.
double spectral_norm(const Matrix& m);
/// Smallest eigenvalue of the symmetric part of m.
double min_eigenvalue(const Matrix& m);
double quadratic_form(const Matrix& m, const Vector& v);
Matrix symmetrize(const Matrix& m);
/// max |m(i,j) - m(j,i)|
double asymmetry(const Matrix& m);

}  // namespace linalg
}  // namespace socshape
