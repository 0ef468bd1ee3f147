#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ens/surrogate.hpp"
#include "support/generators.hpp"

using namespace ens;

namespace {

BaggingModeld demo_model() { return {0.2, 0.1, -0.2, 0.6, 0.05}; }

EnsembleSpec ten() { return EnsembleSpec{10}; }

// Problem whose constraint is satisfied everywhere, for exercising the
// unconstrained descent path with arbitrary objectives.
ContinuousProblem free_problem(ContinuousProblem::Surrogate objective, double lo, double hi) {
  ContinuousProblem p;
  p.dimension = 1;
  p.bounds = {{lo, hi}};
  p.baseline = {0.25, 0.05, 0.5};
  p.ensemble_error = std::move(objective);
  p.correlation = [](const Eigen::VectorXd&) { return -0.5; };
  p.delta_error = [](const Eigen::VectorXd&) { return -0.01; };
  p.variance = [](const Eigen::VectorXd&) { return 0.05; };
  return p;
}

}  // namespace

TEST_CASE("keep-rate problem recovers the closed-form optimum across seeds") {
  const auto model = demo_model();
  const auto problem = make_bagging_problem(model, ten());
  const double alpha_star = optimal_alpha(model, ten());
  REQUIRE(alpha_star == doctest::Approx(0.955).epsilon(1e-12));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SurrogateOptions opts;
    opts.rng_seed = seed;
    const auto result = surrogate_optimize(problem, ten(), opts);
    INFO("seed " << seed << " point " << result.point[0]);
    CHECK(result.feasible);
    CHECK(std::abs(result.point[0] - alpha_star) < 1e-4);
    CHECK(result.constraint_margin > 0.0);
    CHECK(result.constraint_margin == doctest::Approx(0.0045).epsilon(1e-4));
    CHECK(result.objective == doctest::Approx(0.1817975).epsilon(1e-6));
  }
}

TEST_CASE("keep-rate problem tracks random admissible models too") {
  testgen::Rng rng(2026);
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = testgen::random_admissible_model(rng, ten());
    BaggingProblemOptions bounds;
    bounds.lower = 0.01;
    const auto problem = make_bagging_problem(model, ten(), bounds);
    const double alpha_star = optimal_alpha(model, ten());

    SurrogateOptions opts;
    opts.rng_seed = static_cast<std::uint64_t>(trial);
    const auto result = surrogate_optimize(problem, ten(), opts);
    INFO("trial " << trial << " alpha* " << alpha_star << " found " << result.point[0]);
    CHECK(result.feasible);
    CHECK(std::abs(result.point[0] - alpha_star) < 1e-4);
    CHECK(result.objective ==
          doctest::Approx(minimal_ensemble_error(model, ten()).minimal_error).epsilon(1e-8));
  }
}

TEST_CASE("families with sub-resolution improvement report infeasibility") {
  // The decorrelation payoff is so small that no representable point clears
  // the strict constraint; a dense scan agrees.
  const BaggingModeld model{0.2, 50.0, -1e-8, 0.6, 0.05};
  BaggingProblemOptions bounds;
  bounds.lower = 0.5;
  const auto problem = make_bagging_problem(model, ten(), bounds);

  for (int i = 0; i <= 5000; ++i) {
    Eigen::VectorXd x(1);
    x[0] = 0.5 + 0.5 * static_cast<double>(i) / 5000.0;
    CHECK(constraint_margin(problem, ten(), x) <= 0.0);
  }

  const auto result = surrogate_optimize(problem, ten(), SurrogateOptions{});
  CHECK(!result.feasible);
  CHECK(result.constraint_margin <= 0.0);
}

TEST_CASE("constant surrogates equal to the baseline are never feasible") {
  ContinuousProblem p;
  p.dimension = 1;
  p.bounds = {{0.0, 1.0}};
  p.baseline = {0.25, 0.05, 0.5};
  p.ensemble_error = [](const Eigen::VectorXd&) { return 0.2275; };
  p.correlation = [](const Eigen::VectorXd&) { return 0.5; };
  p.delta_error = [](const Eigen::VectorXd&) { return 0.0; };
  p.variance = [](const Eigen::VectorXd&) { return 0.05; };

  const auto result = surrogate_optimize(p, ten(), SurrogateOptions{});
  CHECK(!result.feasible);
  CHECK(result.constraint_margin == 0.0);
}

TEST_CASE("more starts never worsen the merged objective") {
  // Two-basin objective: the single-start run may settle in the wrong basin,
  // extra starts must only improve the merge.
  auto objective = [](const Eigen::VectorXd& x) {
    const double v = x[0];
    return (v * v - 1.0) * (v * v - 1.0) + 0.3 * v;
  };
  const auto problem = free_problem(objective, -2.0, 2.0);

  SurrogateOptions one;
  one.multistart = 1;
  one.rng_seed = 11;
  SurrogateOptions many = one;
  many.multistart = 16;

  const auto r1 = surrogate_optimize(problem, ten(), one);
  const auto r16 = surrogate_optimize(problem, ten(), many);

  CHECK(r16.objective <= r1.objective + 1e-12);
  CHECK(r16.point[0] < 0.0);  // global basin sits left of the origin
  CHECK(r16.history.size() == 16u);
  CHECK(r1.history.size() == 1u);
}

TEST_CASE("minima outside the box are projected onto the boundary") {
  auto objective = [](const Eigen::VectorXd& x) {
    return (x[0] - 3.0) * (x[0] - 3.0);
  };
  const auto problem = free_problem(objective, 0.0, 1.0);
  const auto result = surrogate_optimize(problem, ten(), SurrogateOptions{});
  CHECK(result.point[0] == 1.0);
  CHECK(result.feasible);
}

TEST_CASE("start bookkeeping is complete and ordered") {
  const auto problem = make_bagging_problem(demo_model(), ten());
  SurrogateOptions opts;
  opts.multistart = 5;
  opts.rng_seed = 4;
  const auto result = surrogate_optimize(problem, ten(), opts);

  REQUIRE(result.history.size() == 5u);
  for (int s = 0; s < 5; ++s) {
    const auto& start = result.history[static_cast<std::size_t>(s)];
    CHECK(start.start_index == s);
    CHECK(start.initial_point[0] >= 0.01);
    CHECK(start.initial_point[0] <= 1.0);
    CHECK(start.iterations > 0);
  }
  CHECK(result.best_start >= 0);
  CHECK(result.best_start < 5);

  const auto repeat = surrogate_optimize(problem, ten(), opts);
  CHECK(repeat.point[0] == result.point[0]);
  CHECK(repeat.best_start == result.best_start);
}

TEST_CASE("callback failures surface with the start index attached") {
  auto problem = free_problem(
      [](const Eigen::VectorXd&) -> double { throw std::runtime_error("surrogate backend down"); },
      0.0, 1.0);
  SurrogateOptions opts;
  opts.multistart = 2;
  CHECK_THROWS_WITH_AS(surrogate_optimize(problem, ten(), opts),
                       doctest::Contains("start 0"), std::runtime_error);
}

TEST_CASE("problem and option validation rejects unusable inputs") {
  const auto good = make_bagging_problem(demo_model(), ten());

  ContinuousProblem no_dim = good;
  no_dim.dimension = 0;
  CHECK_THROWS_AS(validate(no_dim), std::invalid_argument);

  ContinuousProblem bad_bounds = good;
  bad_bounds.bounds = {{1.0, 0.0}};
  CHECK_THROWS_AS(validate(bad_bounds), std::invalid_argument);

  ContinuousProblem no_callback = good;
  no_callback.variance = nullptr;
  CHECK_THROWS_AS(validate(no_callback), std::invalid_argument);

  CHECK_THROWS_AS(surrogate_optimize(good, EnsembleSpec{1}, SurrogateOptions{}),
                  std::invalid_argument);

  SurrogateOptions zero_starts;
  zero_starts.multistart = 0;
  CHECK_THROWS_AS(surrogate_optimize(good, ten(), zero_starts), std::invalid_argument);

  CHECK_THROWS_AS(make_bagging_problem(demo_model(), ten(), BaggingProblemOptions{1.0, 0.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_bagging_problem(demo_model(), ten(), BaggingProblemOptions{1.5, 0.01, 1.0}),
                  std::invalid_argument);
}
