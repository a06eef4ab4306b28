#include "socshape/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace socshape {

using nlohmann::json;

namespace {

Matrix read_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a non-empty 2-D array");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw InputError(where + ": expected a non-empty 2-D array");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InputError(where + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw InputError(where + ": non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Vector read_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw InputError(where + ": non-numeric entry");
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

std::vector<double> read_supply(const json& j, std::size_t horizon, const std::string& where) {
  if (j.is_array()) {
    const Vector v = read_vector(j, where);
    return {v.data(), v.data() + v.size()};
  }
  if (!j.is_object()) throw InputError(where + ": expected an array or a descriptor object");
  const auto kind = j.value("kind", std::string{});
  if (kind != "sinusoid") throw InputError(where + ": unknown supply kind '" + kind + "'");
  for (const char* key : {"amp", "period_steps", "offset"}) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw InputError(where + ": sinusoid needs numeric '" + key + "'");
    }
  }
  const double amp = j["amp"].get<double>();
  const double period = j["period_steps"].get<double>();
  const double offset = j["offset"].get<double>();
  if (!(period > 0.0)) throw InputError(where + ": period_steps must be positive");
  std::vector<double> a(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    a[t] = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period) + offset;
  }
  return a;
}

Matrix read_symmetric(const json& j, const std::string& where,
                      std::vector<std::string>& warnings) {
  Matrix m = read_matrix(j, where);
  if (m.rows() != m.cols()) return m;
  const double asym = linalg::asymmetry(m);
  if (asym > 1e-8) {
    std::ostringstream os;
    os << where << ": asymmetry " << asym << " removed by symmetrization";
    warnings.push_back(os.str());
  }
  return linalg::symmetrize(m);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InputError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

}  // namespace

LoadedScenario parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("scenario: top level must be an object");

  LoadedScenario out;
  Scenario& s = out.scenario;
  const auto& horizon = require(doc, "horizon", "scenario");
  if (!horizon.is_number_integer() || horizon.get<long long>() < 1) {
    throw InputError("scenario: horizon must be a positive integer");
  }
  s.horizon = horizon.get<std::size_t>();
  const auto& cap = require(doc, "price_cap", "scenario");
  if (!cap.is_number()) throw InputError("scenario: price_cap must be a number");
  s.price_cap = cap.get<double>();

  const auto& agents = require(doc, "agents", "scenario");
  if (!agents.is_array()) throw InputError("scenario: agents must be an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& ja = agents[i];
    const std::string where = "agents[" + std::to_string(i) + "]";
    if (!ja.is_object()) throw InputError(where + ": expected an object");
    AgentModel a;
    a.A = read_matrix(require(ja, "A", where), where + ".A");
    a.B = read_matrix(require(ja, "B", where), where + ".B");
    a.H = read_symmetric(require(ja, "H", where), where + ".H", out.warnings);
    a.R = read_symmetric(require(ja, "R", where), where + ".R", out.warnings);
    const bool has_q_matrix = ja.contains("Q");
    const bool has_q_scalar = ja.contains("q");
    if (has_q_matrix == has_q_scalar) {
      throw InputError(where + ": exactly one of 'Q' or 'q' is required");
    }
    if (has_q_matrix) {
      a.Q = read_symmetric(ja["Q"], where + ".Q", out.warnings);
    } else {
      if (!ja["q"].is_number()) throw InputError(where + ".q: expected a number");
      a.Q = ja["q"].get<double>() * Matrix::Identity(a.A.rows(), a.A.rows());
    }
    a.x0 = read_vector(require(ja, "x0", where), where + ".x0");
    a.supply = read_supply(require(ja, "supply", where), s.horizon, where + ".supply");
    s.agents.push_back(std::move(a));
  }

  if (doc.contains("constants")) {
    const auto& jc = doc["constants"];
    if (!jc.is_object()) throw InputError("scenario: constants must be an object");
    auto opt = [&](const char* key) -> std::optional<double> {
      if (!jc.contains(key)) return std::nullopt;
      if (!jc[key].is_number()) throw InputError(std::string("constants.") + key + ": number expected");
      return jc[key].get<double>();
    };
    s.constants_override = {opt("gamma"), opt("alpha"), opt("beta"), opt("rho")};
  }
  return out;
}

LoadedScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace socshape
