#include "socshape/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <sstream>

namespace socshape {

LambdaBarStrategy LambdaBarStrategy::parse(const std::string& text) {
  if (text == "boundary") return boundary();
  const std::string prefix = "grid:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string digits = text.substr(prefix.size());
    std::size_t used = 0;
    int g = 0;
    try {
      g = std::stoi(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == digits.size() && !digits.empty() && g >= 1) return grid(g);
  }
  throw InputError("strategy must be 'boundary' or 'grid:<g>', got '" + text + "'");
}

std::string LambdaBarStrategy::to_string() const {
  return kind == Kind::Boundary ? "boundary" : "grid:" + std::to_string(grid_points);
}

std::optional<double> LambdaBarCache::lookup(const Key& key) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void LambdaBarCache::insert(const Key& key, double value) {
  std::lock_guard lock(mutex_);
  entries_.emplace(key, value);
}

std::size_t LambdaBarCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

namespace {

class Fnv1a {
 public:
  void add(double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      hash_ ^= b;
      hash_ *= 1099511628211ULL;
    }
  }
  void add(const Matrix& m) {
    add(static_cast<double>(m.rows()));
    add(static_cast<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) add(m.data()[i]);
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 1469598103934665603ULL;
};

}  // namespace

std::uint64_t scenario_fingerprint(const Scenario& s) {
  Fnv1a h;
  h.add(static_cast<double>(s.horizon));
  h.add(s.price_cap);
  for (const auto& a : s.agents) {
    h.add(a.A);
    h.add(a.B);
    h.add(a.H);
    h.add(a.R);
    h.add(a.x0);
    for (double v : a.supply) h.add(v);
  }
  return h.value();
}

namespace {

double max_price_at(const Scenario& s, const std::vector<double>& q, const SolverOptions& opts) {
  try {
    return solve_equilibrium(s.with_scalar_preferences(q), opts).prices.max();
  } catch (const SolverFailure& e) {
    std::ostringstream os;
    os << "lambda_bar: equilibrium solve failed at q = (";
    for (std::size_t i = 0; i < q.size(); ++i) os << (i ? ", " : "") << q[i];
    os << "): " << e.what();
    throw ShapingError(os.str(), q);
  }
}

}  // namespace

LambdaBarEvaluation evaluate_lambda_bar(const Scenario& s, double delta,
                                        const LambdaBarStrategy& strategy,
                                        const SolverOptions& opts) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw PreconditionError("lambda_bar: delta must be positive and finite");
  }
  const std::size_t n = s.agents.size();
  LambdaBarEvaluation out;
  out.argmax_q.assign(n, delta);
  out.value = max_price_at(s, out.argmax_q, opts);
  if (strategy.kind == LambdaBarStrategy::Kind::Boundary) return out;

  const int g = strategy.grid_points;
  if (n > 3 || g < 1 || g > 4) {
    throw PreconditionError("lambda_bar grid strategy requires n <= 3 and 1 <= g <= 4");
  }
  std::vector<int> idx(n, 1);
  std::vector<double> q(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) q[i] = delta * idx[i] / g;
    const bool is_boundary = std::all_of(idx.begin(), idx.end(), [g](int j) { return j == g; });
    if (!is_boundary) {
      const double v = max_price_at(s, q, opts);
      if (v > out.value) {
        out.value = v;
        out.argmax_q = q;
      }
    }
    std::size_t pos = 0;
    while (pos < n && ++idx[pos] > g) idx[pos++] = 1;
    if (pos == n) break;
  }
  return out;
}

double lambda_bar(const Scenario& s, double delta, const LambdaBarStrategy& strategy,
                  const SolverOptions& opts, LambdaBarCache* cache) {
  LambdaBarCache::Key key{scenario_fingerprint(s), delta, strategy.to_string()};
  if (cache) {
    if (auto hit = cache->lookup(key)) return *hit;
  }
  const double v = evaluate_lambda_bar(s, delta, strategy, opts).value;
  if (cache) cache->insert(key, v);
  return v;
}

const char* to_string(BisectionResult::Status status) {
  switch (status) {
    case BisectionResult::Status::Converged: return "converged";
    case BisectionResult::Status::IterationCap: return "iteration-cap";
    case BisectionResult::Status::ThresholdUnreachable: return "threshold-unreachable";
  }
  return "?";
}

BisectionResult bisect_threshold(const std::function<double(double)>& f, double threshold,
                                 double d_rho, double eps, int max_iters) {
  if (!(d_rho > 0.0)) throw PreconditionError("bisection: d_rho must be positive");
  if (!(eps >= 0.0)) throw PreconditionError("bisection: eps_lambda must be non-negative");
  if (max_iters < 1) throw PreconditionError("bisection: max_iters must be >= 1");
  const double top = f(d_rho);
  if (!(top > threshold)) {
    std::ostringstream os;
    os << "d_rho not large enough: lambda_bar(" << d_rho << ") = " << top
       << " does not exceed the threshold " << threshold;
    throw PreconditionError(os.str());
  }

  BisectionResult res;
  double b = 0.0;
  double d = d_rho;
  for (int k = 0; k < max_iters; ++k) {
    const double mid = 0.5 * (b + d);
    const double value = f(mid);
    res.trace.push_back({k, b, d, mid, value});
    if (std::abs(value - threshold) <= eps) {
      res.status = BisectionResult::Status::Converged;
      res.delta_max = mid;
      res.lambda_at_delta = value;
      return res;
    }
    if (value > threshold) {
      d = mid;
    } else {
      b = mid;
    }
  }
  // Iteration cap: report the last midpoint if admissible, else the
  // admissible bracket end.
  res.status = BisectionResult::Status::IterationCap;
  const auto& last = res.trace.back();
  if (last.lambda_at_L <= threshold + eps) {
    res.delta_max = last.L;
    res.lambda_at_delta = last.lambda_at_L;
  } else {
    res.delta_max = b;
    res.lambda_at_delta = b > 0.0 ? f(b) : 0.0;
  }
  return res;
}

ShapingReport bisection_shape(const Scenario& s, const ShapingOptions& opts) {
  auto report = validate_scenario(s.with_uniform_preference(1.0));
  if (!report.valid()) throw InvalidScenario(std::move(report));

  ShapingReport rep;
  rep.constants = scenario_constants(s.with_uniform_preference(1.0));
  rep.qp = delta_max_qp(s.with_uniform_preference(1.0));
  rep.dp = delta_max_dp(s.with_uniform_preference(1.0));
  rep.price_cap = s.price_cap;
  rep.eps_lambda = opts.eps_lambda.value_or(1e-3 * s.price_cap);
  rep.strategy = opts.strategy.to_string();

  LambdaBarCache cache;
  auto f = [&](double delta) { return lambda_bar(s, delta, opts.strategy, opts.solver, &cache); };

  if (opts.d_rho) {
    rep.d_rho = *opts.d_rho;
  } else {
    double candidate = 1.0;
    while (f(candidate) <= s.price_cap && candidate < std::ldexp(1.0, 20)) candidate *= 2.0;
    rep.d_rho = candidate;
    if (f(candidate) <= s.price_cap) {
      rep.bisection.status = BisectionResult::Status::ThresholdUnreachable;
      rep.bisection.delta_max = candidate;
      rep.bisection.lambda_at_delta = f(candidate);
      rep.certified = true;
      return rep;
    }
  }

  rep.bisection = bisect_threshold(f, s.price_cap, rep.d_rho, rep.eps_lambda, opts.max_iters);
  rep.certified = rep.bisection.delta_max > 0.0 &&
                  rep.bisection.lambda_at_delta <= s.price_cap + rep.eps_lambda;
  return rep;
}

std::vector<ProbePoint> monotonicity_probe(const Scenario& s, const std::vector<double>& deltas,
                                           const LambdaBarStrategy& strategy,
                                           const SolverOptions& opts) {
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || (i > 0 && !(deltas[i] > deltas[i - 1]))) {
      throw PreconditionError("monotonicity_probe: deltas must be positive and strictly increasing");
    }
  }
  std::vector<std::future<ProbePoint>> jobs;
  jobs.reserve(deltas.size());
  for (double delta : deltas) {
    jobs.push_back(std::async(std::launch::async, [&s, &strategy, &opts, delta] {
      ProbePoint p;
      p.delta = delta;
      try {
        p.value = lambda_bar(s, delta, strategy, opts);
        p.ok = true;
      } catch (const Error& e) {
        p.error = e.what();
      }
      return p;
    }));
  }
  std::vector<ProbePoint> out;
  out.reserve(jobs.size());
  const ProbePoint* prev = nullptr;
  for (auto& job : jobs) {
    out.push_back(job.get());
  }
  for (auto& p : out) {
    if (!p.ok) continue;
    if (prev && p.value < prev->value - 1e-6 * std::max(1.0, std::abs(prev->value))) {
      p.decrease = true;
    }
    prev = &p;
  }
  return out;
}

}  // namespace socshape
