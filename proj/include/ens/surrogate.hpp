#pragma once

#include "ens/bagging.hpp"
#include "ens/stats.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace ens {

/// Continuous architecture family described only through surrogate estimates
/// of the four quantities the acceptance gate consumes. Callbacks must be
/// total on the bounded domain and safe to call from several threads at once;
/// delta_error is relative to the baseline the problem was built against.
struct ContinuousProblem {
  using Surrogate = std::function<double(const Eigen::VectorXd&)>;

  int dimension = 0;
  std::vector<std::pair<double, double>> bounds;  // one closed interval per dimension
  Surrogate ensemble_error;
  Surrogate correlation;
  Surrogate delta_error;
  Surrogate variance;
  ArchitectureStatsd baseline;
};

void validate(const ContinuousProblem& problem);

struct SurrogateOptions {
  int multistart = 8;
  int max_iterations = 200;  // descent steps per penalty stage
  int penalty_stages = 6;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double fd_step_rel = 1e-6;
  double constraint_tolerance = 0.0;  // feasible iff margin > tolerance
  std::uint64_t rng_seed = 0;
};

struct StartResult {
  int start_index = 0;
  Eigen::VectorXd initial_point;
  Eigen::VectorXd point;
  double objective = 0.0;
  double constraint_margin = 0.0;
  bool feasible = false;
  int iterations = 0;
};

struct SurrogateResult {
  Eigen::VectorXd point;
  double objective = 0.0;
  double constraint_margin = 0.0;
  bool feasible = false;
  int best_start = 0;
  std::vector<StartResult> history;  // one entry per start, in start order
};

/// Signed slack of the strict acceptance constraint at x: the monotonic
/// threshold minus the surrogate correlation. Positive means acceptable;
/// -infinity when the surrogate variance is not positive.
double constraint_margin(const ContinuousProblem& problem, const EnsembleSpec& ens,
                         const Eigen::VectorXd& x);

/// Minimizes the surrogate ensemble error subject to the strict acceptance
/// constraint: quadratic penalty with a geometric weight schedule, projected
/// gradient descent on central finite differences, multi-start from a
/// quasi-random (Halton) point set. Starts run concurrently; the merge is
/// deterministic (best feasible objective, ties broken by start index; if no
/// start ends feasible, smallest violation wins and feasible is false).
SurrogateResult surrogate_optimize(const ContinuousProblem& problem, const EnsembleSpec& ens,
                                   const SurrogateOptions& opts = {});

struct BaggingProblemOptions {
  double alpha_old = 1.0;  // incumbent keep-rate the deltas are measured from
  double lower = 0.01;
  double upper = 1.0;
};

/// One-dimensional keep-rate problem wired to the analytic feature-bagging
/// curves, whose constrained optimum is known in closed form.
ContinuousProblem make_bagging_problem(const BaggingModeld& model, const EnsembleSpec& ens,
                                       const BaggingProblemOptions& opts = {});

}  // namespace ens
