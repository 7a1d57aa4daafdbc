#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Alternating clustering view of the aggregation loop: points x_i pulled
// toward targets t_j under memberships u_ij, objective ½ ΣΣ u² ‖x − t‖².
namespace drmn {

using Points = std::vector<std::vector<double>>;      // rows are vectors
using Membership = std::vector<std::vector<double>>;  // m x n

double objective(const Points& x, const Points& t, const Membership& u);

/// Per target, 1 on its k nearest points (ties by index); exactly k ones per column.
Membership assign_topk(const Points& x, const Points& t, std::size_t k);

/// x_i <- (1 - α Σ_j u_ij²) x_i + α Σ_j u_ij² t_j.
Points step_x(const Points& x, const Points& t, const Membership& u, double alpha);
/// x_i <- (1 - α u_ij²) x_i + α u_ij² t_j for one target j.
Points step_x_online(const Points& x, const Points& t, const Membership& u, double alpha,
                     std::size_t j);

/// u_ij = (1/d_ij) / Σ_k 1/d_ik with d = ‖x_i − t_j‖²; a point coinciding
/// with a target gets membership 1 on the first such target.
Membership fuzzy_memberships(const Points& x, const Points& t);
/// t_j = Σ_i u_ij² x_i / Σ_i u_ij².
Points weighted_targets(const Points& x, const Membership& u, const Points& previous);

struct FuzzyResult {
  Membership u;  // memberships for the input targets
  Points t;      // targets re-centred on those memberships
};
FuzzyResult fuzzy_update(const Points& x, const Points& t);

enum class ClusterMode { assign, fuzzy };

struct ClusterProblem {
  ClusterMode mode = ClusterMode::assign;
  Points x;
  Points t;
  std::size_t k = 1;
  double alpha = 0.5;
  std::size_t iterations = 20;

  void validate() const;
};

struct ClusterTrace {
  std::vector<double> objective;  // entry 0 is the starting state
  Points x;
  Points t;
  Membership u;
};

/// Mode assign: u = topk(x), then batch x-steps with re-assignment.
/// Mode fuzzy: repeated fuzzy_update on the targets, points fixed.
ClusterTrace alternate(const ClusterProblem& problem);

/// Largest single-step increase in the trace (0 when non-increasing).
double max_increase(const std::vector<double>& trace);

/// JSON: {"mode": "assign"|"fuzzy", "points": [[..]], "targets": [[..]],
///        "k": 1, "alpha": 0.5, "iterations": 20}
ClusterProblem parse_cluster_problem(std::string_view text);

/// iteration,objective
std::string cluster_trace_csv(const ClusterTrace& trace);

}  // namespace drmn
