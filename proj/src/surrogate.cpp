#include "ens/surrogate.hpp"

#include "ens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>

namespace ens {

namespace {

constexpr double kVarianceViolation = 1e9;  // stands in for an unusable variance

Eigen::VectorXd project(const ContinuousProblem& p, Eigen::VectorXd x) {
  for (int j = 0; j < p.dimension; ++j)
    x[j] = std::clamp(x[j], p.bounds[j].first, p.bounds[j].second);
  return x;
}

double violation(const ContinuousProblem& p, const EnsembleSpec& ens, const Eigen::VectorXd& x,
                 double tolerance) {
  const double var = p.variance(x);
  if (!(var > 0.0)) return kVarianceViolation;
  const double threshold =
      monotonic_threshold(p.baseline, p.delta_error(x), var, ens);
  return std::min(std::max(0.0, tolerance - (threshold - p.correlation(x))), kVarianceViolation);
}

double penalized(const ContinuousProblem& p, const EnsembleSpec& ens, const Eigen::VectorXd& x,
                 double weight, double tolerance) {
  const double v = violation(p, ens, x, tolerance);
  return p.ensemble_error(x) + weight * v * v;
}

StartResult run_start(const ContinuousProblem& p, const EnsembleSpec& ens,
                      const SurrogateOptions& opts, int index, Eigen::VectorXd x0) {
  StartResult r;
  r.start_index = index;
  r.initial_point = x0;

  Eigen::VectorXd x = project(p, std::move(x0));
  Eigen::VectorXd grad(p.dimension);
  double weight = opts.initial_penalty;

  for (int stage = 0; stage < opts.penalty_stages; ++stage, weight *= opts.penalty_growth) {
    for (int it = 0; it < opts.max_iterations; ++it) {
      ++r.iterations;
      const double fx = penalized(p, ens, x, weight, opts.constraint_tolerance);

      for (int j = 0; j < p.dimension; ++j) {
        const double step = opts.fd_step_rel * std::max(1.0, std::abs(x[j]));
        const double hi = std::min(p.bounds[j].second, x[j] + step);
        const double lo = std::max(p.bounds[j].first, x[j] - step);
        if (hi <= lo) {
          grad[j] = 0.0;
          continue;
        }
        Eigen::VectorXd probe = x;
        probe[j] = hi;
        const double f_hi = penalized(p, ens, probe, weight, opts.constraint_tolerance);
        probe[j] = lo;
        const double f_lo = penalized(p, ens, probe, weight, opts.constraint_tolerance);
        grad[j] = (f_hi - f_lo) / (hi - lo);
      }
      if (grad.squaredNorm() < 1e-22) break;

      bool moved = false;
      Eigen::VectorXd next;
      double t = 1.0;
      for (int bt = 0; bt < 50; ++bt, t *= 0.5) {
        Eigen::VectorXd cand = project(p, x - t * grad);
        const double predicted = grad.dot(x - cand);
        if (!(predicted > 0.0)) break;  // pinned against the bounds
        if (penalized(p, ens, cand, weight, opts.constraint_tolerance) <=
            fx - 1e-4 * predicted) {
          next = std::move(cand);
          moved = true;
          break;
        }
      }
      if (!moved) break;
      const bool settled =
          (next - x).lpNorm<Eigen::Infinity>() < 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>());
      x = std::move(next);
      if (settled) break;
    }
  }

  r.point = x;
  r.objective = p.ensemble_error(x);
  r.constraint_margin = constraint_margin(p, ens, x);
  r.feasible = r.constraint_margin > opts.constraint_tolerance;
  return r;
}

}  // namespace

void validate(const ContinuousProblem& problem) {
  if (problem.dimension < 1)
    throw std::invalid_argument("ContinuousProblem: dimension must be >= 1");
  if (problem.bounds.size() != static_cast<std::size_t>(problem.dimension))
    throw std::invalid_argument("ContinuousProblem: one bound interval per dimension required");
  for (const auto& [lo, hi] : problem.bounds) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("ContinuousProblem: bounds must be finite with lo <= hi");
  }
  if (!problem.ensemble_error || !problem.correlation || !problem.delta_error ||
      !problem.variance)
    throw std::invalid_argument("ContinuousProblem: all four surrogate callbacks are required");
  validate(problem.baseline);
}

double constraint_margin(const ContinuousProblem& problem, const EnsembleSpec& ens,
                         const Eigen::VectorXd& x) {
  const double var = problem.variance(x);
  if (!(var > 0.0)) return -std::numeric_limits<double>::infinity();
  const double threshold = monotonic_threshold(problem.baseline, problem.delta_error(x), var, ens);
  return threshold - problem.correlation(x);
}

SurrogateResult surrogate_optimize(const ContinuousProblem& problem, const EnsembleSpec& ens,
                                   const SurrogateOptions& opts) {
  validate(problem);
  validate(ens);
  if (ens.size < 2)
    throw std::invalid_argument("surrogate_optimize: ensemble size must be >= 2");
  if (opts.multistart < 1)
    throw std::invalid_argument("surrogate_optimize: multistart must be >= 1");
  if (opts.max_iterations < 1 || opts.penalty_stages < 1)
    throw std::invalid_argument("surrogate_optimize: iteration budget must be >= 1");
  if (!(opts.fd_step_rel > 0.0))
    throw std::invalid_argument("surrogate_optimize: finite-difference step must be > 0");

  // The seed offsets the Halton sequence so distinct seeds explore distinct
  // (still low-discrepancy) start sets.
  const std::uint64_t offset = derive_seed(opts.rng_seed, 0x57a7u) % 8192;

  std::vector<std::future<StartResult>> starts;
  starts.reserve(opts.multistart);
  for (int s = 0; s < opts.multistart; ++s) {
    Eigen::VectorXd x0(problem.dimension);
    for (int j = 0; j < problem.dimension; ++j) {
      const auto& [lo, hi] = problem.bounds[j];
      x0[j] = lo + halton(offset + static_cast<std::uint64_t>(s), j) * (hi - lo);
    }
    starts.push_back(std::async(std::launch::async, run_start, std::cref(problem),
                                std::cref(ens), std::cref(opts), s, std::move(x0)));
  }

  SurrogateResult result;
  result.history.reserve(opts.multistart);
  for (int s = 0; s < opts.multistart; ++s) {
    try {
      result.history.push_back(starts[static_cast<std::size_t>(s)].get());
    } catch (const std::exception& e) {
      throw std::runtime_error("surrogate_optimize: start " + std::to_string(s) +
                               " failed: " + e.what());
    }
  }

  const StartResult* best = nullptr;
  for (const auto& r : result.history) {
    if (!best) {
      best = &r;
      continue;
    }
    if (r.feasible != best->feasible) {
      if (r.feasible) best = &r;
      continue;
    }
    if (r.feasible) {
      if (r.objective < best->objective) best = &r;
    } else if (r.constraint_margin > best->constraint_margin ||
               (r.constraint_margin == best->constraint_margin &&
                r.objective < best->objective)) {
      best = &r;
    }
  }

  result.point = best->point;
  result.objective = best->objective;
  result.constraint_margin = best->constraint_margin;
  result.feasible = best->feasible;
  result.best_start = best->start_index;
  return result;
}

ContinuousProblem make_bagging_problem(const BaggingModeld& model, const EnsembleSpec& ens,
                                       const BaggingProblemOptions& opts) {
  validate(model);
  validate(ens);
  if (!(opts.lower > 0.0) || !(opts.lower <= opts.upper) || !(opts.upper <= 1.0))
    throw std::invalid_argument("make_bagging_problem: need 0 < lower <= upper <= 1");
  if (!(opts.alpha_old > 0.0) || !(opts.alpha_old <= 1.0))
    throw std::invalid_argument("make_bagging_problem: alpha_old must lie in (0, 1]");

  const ArchitectureStatsd baseline = model_stats(opts.alpha_old, model);

  ContinuousProblem p;
  p.dimension = 1;
  p.bounds = {{opts.lower, opts.upper}};
  p.baseline = baseline;
  p.ensemble_error = [model, ens](const Eigen::VectorXd& x) {
    return ensemble_error_alpha(x[0], model, ens);
  };
  p.correlation = [model](const Eigen::VectorXd& x) {
    return model_stats(x[0], model).correlation;
  };
  p.delta_error = [model, baseline](const Eigen::VectorXd& x) {
    return model_stats(x[0], model).expected_error - baseline.expected_error;
  };
  p.variance = [model](const Eigen::VectorXd& x) {
    return model_stats(x[0], model).variance;
  };
  return p;
}

}  // namespace ens
