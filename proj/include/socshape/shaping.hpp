#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "socshape/bounds.hpp"
#include "socshape/core.hpp"
#include "socshape/equilibrium.hpp"

namespace socshape {

/// How the supremum over (q_1..q_n) in (0, delta]^n is evaluated.
struct LambdaBarStrategy {
  enum class Kind { Boundary, Grid };
  Kind kind = Kind::Boundary;
  /// Points per agent for Kind::Grid: delta * j / g, j = 1..g.
  int grid_points = 0;

  static LambdaBarStrategy boundary() { return {}; }
  static LambdaBarStrategy grid(int g) { return {Kind::Grid, g}; }
  /// Accepts "boundary" or "grid:<g>"; throws InputError otherwise.
  static LambdaBarStrategy parse(const std::string& text);
  std::string to_string() const;
};

/// Thread-safe memo of lambda-bar evaluations keyed by
/// (scenario fingerprint, delta, strategy).
class LambdaBarCache {
 public:
  using Key = std::tuple<std::uint64_t, double, std::string>;
  std::optional<double> lookup(const Key& key) const;
  void insert(const Key& key, double value);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<Key, double> entries_;
};

/// FNV-1a over every number that defines the scenario.
std::uint64_t scenario_fingerprint(const Scenario& s);

struct LambdaBarEvaluation {
  double value = 0.0;
  /// Preference tuple attaining the maximum.
  std::vector<double> argmax_q;
};

/// Raised when an inner equilibrium solve fails; names the q-tuple.
class ShapingError : public Error {
 public:
  ShapingError(const std::string& what, std::vector<double> q) : Error(what), q_(std::move(q)) {}
  const std::vector<double>& preferences() const { return q_; }

 private:
  std::vector<double> q_;
};

/// Worst-case equilibrium price max_q max_t lambda*_t with Q_i = q_i I and
/// q_i in (0, delta]. Grid evaluation requires n <= 3 and g <= 4.
LambdaBarEvaluation evaluate_lambda_bar(const Scenario& s, double delta,
                                        const LambdaBarStrategy& strategy,
                                        const SolverOptions& opts = {});

double lambda_bar(const Scenario& s, double delta,
                  const LambdaBarStrategy& strategy = LambdaBarStrategy::boundary(),
                  const SolverOptions& opts = {}, LambdaBarCache* cache = nullptr);

struct BisectionStep {
  int k = 0;
  double b = 0.0;  // admissible end
  double d = 0.0;  // inadmissible end
  double L = 0.0;  // midpoint
  double lambda_at_L = 0.0;
};

struct BisectionResult {
  enum class Status { Converged, IterationCap, ThresholdUnreachable };
  Status status = Status::Converged;
  double delta_max = 0.0;
  double lambda_at_delta = 0.0;
  std::vector<BisectionStep> trace;
};

const char* to_string(BisectionResult::Status status);

/// Bracketed bisection for the largest delta with f(delta) <= threshold.
/// Starts from [0, d_rho]; stops once |f(L) - threshold| <= eps or after
/// max_iters midpoints. Requires f(d_rho) > threshold.
BisectionResult bisect_threshold(const std::function<double(double)>& f, double threshold,
                                 double d_rho, double eps, int max_iters);

struct ShapingOptions {
  /// Initial upper bracket; when unset it is found by doubling from 1.
  std::optional<double> d_rho;
  /// Defaults to 1e-3 * price cap.
  std::optional<double> eps_lambda;
  int max_iters = 40;
  LambdaBarStrategy strategy;
  SolverOptions solver;
};

struct ShapingReport {
  ScenarioConstants constants;
  BoundReport qp;
  BoundReport dp;
  double d_rho = 0.0;
  double eps_lambda = 0.0;
  double price_cap = 0.0;
  std::string strategy;
  BisectionResult bisection;
  /// lambda_bar(delta_max) <= price cap + eps_lambda.
  bool certified = false;
};

/// Numerical social shaping (bisection on lambda_bar) plus the two
/// closed-form bounds for comparison. Throws PreconditionError if an
/// explicit d_rho does not exceed the threshold.
ShapingReport bisection_shape(const Scenario& s, const ShapingOptions& opts = {});

struct ProbePoint {
  double delta = 0.0;
  double value = 0.0;
  bool ok = false;
  std::string error;
  /// Strict decrease versus the previous successful point beyond tolerance.
  bool decrease = false;
};

/// Evaluates lambda_bar on an increasing grid of deltas (concurrently) and
/// flags decreases. Per-point solver failures are recorded, not thrown.
std::vector<ProbePoint> monotonicity_probe(const Scenario& s, const std::vector<double>& deltas,
                                           const LambdaBarStrategy& strategy = {},
                                           const SolverOptions& opts = {});

}  // namespace socshape
