#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "socshape/core.hpp"

namespace socshape {

struct LoadedScenario {
  Scenario scenario;
  /// Non-fatal notes, e.g. symmetrization of a slightly asymmetric matrix.
  std::vector<std::string> warnings;
};

/// Parses the JSON scenario document. Structural problems (missing keys,
/// wrong types, both or neither of Q/q) throw InputError; semantic checks are
/// left to validate_scenario.
LoadedScenario parse_scenario(const std::string& json_text);
LoadedScenario load_scenario(const std::filesystem::path& path);

}  // namespace socshape
