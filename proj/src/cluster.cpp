#include "drmn/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "drmn/errors.hpp"
#include "drmn/format.hpp"

namespace drmn {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

void check_shapes(const Points& x, const Points& t) {
  if (x.empty() || t.empty()) throw ContractError("clustering needs at least one point and one target");
  const std::size_t d = x[0].size();
  if (d == 0) throw ContractError("clustering vectors must be non-empty");
  for (const auto& p : x) {
    if (p.size() != d) throw DimensionError("points have inconsistent dimensions");
  }
  for (const auto& p : t) {
    if (p.size() != d) throw DimensionError("targets and points differ in dimension");
  }
}

void check_membership(const Points& x, const Points& t, const Membership& u) {
  if (u.size() != x.size()) throw DimensionError("membership rows must match point count");
  for (const auto& row : u) {
    if (row.size() != t.size()) throw DimensionError("membership columns must match target count");
  }
}

}  // namespace

double objective(const Points& x, const Points& t, const Membership& u) {
  check_shapes(x, t);
  check_membership(x, t, u);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) acc += u[i][j] * u[i][j] * sq_dist(x[i], t[j]);
  }
  return 0.5 * acc;
}

Membership assign_topk(const Points& x, const Points& t, std::size_t k) {
  check_shapes(x, t);
  if (k == 0 || k > x.size()) {
    throw ParameterError("assignment count k = " + std::to_string(k) + " must be in [1, " +
                         std::to_string(x.size()) + "]");
  }
  Membership u(x.size(), std::vector<double>(t.size(), 0.0));
  std::vector<std::size_t> idx(x.size());
  std::vector<double> d(x.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = sq_dist(x[i], t[j]);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    for (std::size_t r = 0; r < k; ++r) u[idx[r]][j] = 1.0;
  }
  return u;
}

Points step_x(const Points& x, const Points& t, const Membership& u, double alpha) {
  check_shapes(x, t);
  check_membership(x, t, u);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("step size alpha must be in (0, 1)");
  Points out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double w = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) w += u[i][j] * u[i][j];
    for (std::size_t c = 0; c < x[i].size(); ++c) {
      double pull = 0.0;
      for (std::size_t j = 0; j < t.size(); ++j) pull += u[i][j] * u[i][j] * t[j][c];
      out[i][c] = (1.0 - alpha * w) * x[i][c] + alpha * pull;
    }
  }
  return out;
}

Points step_x_online(const Points& x, const Points& t, const Membership& u, double alpha,
                     std::size_t j) {
  check_shapes(x, t);
  check_membership(x, t, u);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("step size alpha must be in (0, 1)");
  if (j >= t.size()) throw ContractError("target index out of range");
  Points out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = alpha * u[i][j] * u[i][j];
    for (std::size_t c = 0; c < x[i].size(); ++c) out[i][c] = (1.0 - w) * x[i][c] + w * t[j][c];
  }
  return out;
}

Membership fuzzy_memberships(const Points& x, const Points& t) {
  check_shapes(x, t);
  Membership u(x.size(), std::vector<double>(t.size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> d(t.size());
    std::size_t hit = t.size();
    for (std::size_t j = 0; j < t.size(); ++j) {
      d[j] = sq_dist(x[i], t[j]);
      if (d[j] == 0.0 && hit == t.size()) hit = j;
    }
    if (hit < t.size()) {
      u[i][hit] = 1.0;
      continue;
    }
    double z = 0.0;
    for (double dj : d) z += 1.0 / dj;
    for (std::size_t j = 0; j < t.size(); ++j) u[i][j] = (1.0 / d[j]) / z;
  }
  return u;
}

Points weighted_targets(const Points& x, const Membership& u, const Points& previous) {
  check_shapes(x, previous);
  check_membership(x, previous, u);
  Points t = previous;
  for (std::size_t j = 0; j < previous.size(); ++j) {
    double w = 0.0;
    std::vector<double> acc(x[0].size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u2 = u[i][j] * u[i][j];
      w += u2;
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += u2 * x[i][c];
    }
    // A target no point belongs to keeps its position.
    if (w == 0.0) continue;
    for (std::size_t c = 0; c < acc.size(); ++c) t[j][c] = acc[c] / w;
  }
  return t;
}

FuzzyResult fuzzy_update(const Points& x, const Points& t) {
  FuzzyResult r;
  r.u = fuzzy_memberships(x, t);
  r.t = weighted_targets(x, r.u, t);
  return r;
}

void ClusterProblem::validate() const {
  check_shapes(x, t);
  if (iterations == 0) throw ParameterError("iterations must be >= 1");
  if (mode == ClusterMode::assign) {
    if (k == 0 || k > x.size()) throw ParameterError("k must be in [1, number of points]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must be in (0, 1)");
  }
}

ClusterTrace alternate(const ClusterProblem& p) {
  p.validate();
  ClusterTrace tr;
  tr.x = p.x;
  tr.t = p.t;
  if (p.mode == ClusterMode::assign) {
    tr.u = assign_topk(tr.x, tr.t, p.k);
    tr.objective.push_back(objective(tr.x, tr.t, tr.u));
    for (std::size_t it = 0; it < p.iterations; ++it) {
      tr.x = step_x(tr.x, tr.t, tr.u, p.alpha);
      tr.u = assign_topk(tr.x, tr.t, p.k);
      tr.objective.push_back(objective(tr.x, tr.t, tr.u));
    }
  } else {
    tr.u = fuzzy_memberships(tr.x, tr.t);
    tr.objective.push_back(objective(tr.x, tr.t, tr.u));
    for (std::size_t it = 0; it < p.iterations; ++it) {
      tr.t = weighted_targets(tr.x, tr.u, tr.t);
      tr.u = fuzzy_memberships(tr.x, tr.t);
      tr.objective.push_back(objective(tr.x, tr.t, tr.u));
    }
  }
  return tr;
}

double max_increase(const std::vector<double>& trace) {
  double worst = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i] - trace[i - 1]);
  return worst;
}

namespace {

Points parse_points(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("problem: missing \"") + key + "\"");
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw ConfigError(std::string("problem: \"") + key + "\" must be an array of vectors");
  Points out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_array()) {
      throw ConfigError(std::string("problem: \"") + key + "\"[" + std::to_string(i) + "] is not an array");
    }
    std::vector<double> v;
    for (const auto& e : arr[i]) {
      if (!e.is_number()) {
        throw ConfigError(std::string("problem: \"") + key + "\"[" + std::to_string(i) + "] has a non-number");
      }
      v.push_back(e.get<double>());
      if (!std::isfinite(v.back())) throw ConfigError("problem: non-finite coordinate");
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

ClusterProblem parse_cluster_problem(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n'));
    const std::size_t line_start = text.rfind('\n', pos == 0 ? 0 : pos - 1);
    const std::size_t column = line_start == std::string_view::npos ? pos + 1 : pos - line_start;
    throw ConfigError("problem: parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(column) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("problem: top level must be an object");
  static const char* known[] = {"mode", "points", "targets", "k", "alpha", "iterations"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
      throw ConfigError("problem: unknown key \"" + it.key() + "\"");
    }
  }
  ClusterProblem p;
  const std::string mode = j.value("mode", std::string("assign"));
  if (mode == "assign") {
    p.mode = ClusterMode::assign;
  } else if (mode == "fuzzy") {
    p.mode = ClusterMode::fuzzy;
  } else {
    throw ConfigError("problem: mode must be \"assign\" or \"fuzzy\", got \"" + mode + "\"");
  }
  p.x = parse_points(j, "points");
  p.t = parse_points(j, "targets");
  try {
    p.k = j.value("k", std::size_t{1});
    p.alpha = j.value("alpha", 0.5);
    p.iterations = j.value("iterations", std::size_t{20});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  return p;
}

std::string cluster_trace_csv(const ClusterTrace& trace) {
  std::string out = "iteration,objective\n";
  for (std::size_t i = 0; i < trace.objective.size(); ++i) {
    out += std::to_string(i) + "," + format_double(trace.objective[i]) + "\n";
  }
  return out;
}

}  // namespace drmn
