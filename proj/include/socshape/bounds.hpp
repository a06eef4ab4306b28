#pragma once

#include <string>
#include <vector>

#include "socshape/core.hpp"

namespace socshape {

enum class BoundMethod { QP, DP };

const char* to_string(BoundMethod method);

/// Closed-form admissible bound on ||Q_i||: any preferences with
/// ||Q_i|| <= delta_max keep every equilibrium price at or below the cap.
struct BoundReport {
  ScenarioConstants constants;
  /// Bound implied by each step k; +inf when step k imposes no constraint.
  std::vector<double> per_step_caps;
  double delta_max = 0.0;
  BoundMethod method = BoundMethod::QP;
  /// Conventions applied while evaluating (e.g. 0^0 = 1 when alpha = 0).
  std::string notes;
};

/// Bound from the stationarity conditions of the stacked (open-loop)
/// quadratic program; cross terms run over j in [0, t-1], j != k.
BoundReport delta_max_qp(const Scenario& s);

/// Bound from the Riccati cost-to-go chain; cross terms run over j < k only,
/// so it never falls below delta_max_qp.
BoundReport delta_max_dp(const Scenario& s);

}  // namespace socshape
