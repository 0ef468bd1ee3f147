#include <doctest.h>

#include "ens/bagging.hpp"

#include "support/generators.hpp"

#include <cmath>
#include <random>

using namespace ens;

namespace {

// Shared demo fixture: invented constants, no external calibration.
BaggingModeld demo_model() { return BaggingModeld{0.2, 0.1, -0.2, 0.6, 0.05}; }

// Brute-force minimizer of the retention curve over (0, 1] with a fixed step.
double grid_argmin(const BaggingModeld& model, const EnsembleSpec& ens, double step) {
  double best_alpha = 1.0;
  double best_value = ensemble_error_alpha(1.0, model, ens);
  for (double alpha = step; alpha < 1.0; alpha += step) {
    const double value = ensemble_error_alpha(alpha, model, ens);
    if (value < best_value) {
      best_value = value;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

}  // namespace

TEST_CASE("retention curves evaluate the stated closed forms") {
  const auto model = demo_model();

  auto at = model_stats(0.9, model);
  CHECK(at.expected_error == doctest::Approx(0.201).epsilon(1e-12));
  CHECK(at.variance == doctest::Approx(0.05));
  CHECK(at.correlation == doctest::Approx(0.58).epsilon(1e-12));

  at = model_stats(0.5, model);
  CHECK(at.expected_error == doctest::Approx(0.225).epsilon(1e-12));
  CHECK(at.correlation == doctest::Approx(0.5).epsilon(1e-12));

  at = model_stats(1.0, model);
  CHECK(at.expected_error == doctest::Approx(0.2));
  CHECK(at.correlation == doctest::Approx(0.6));

  CHECK_THROWS_AS(model_stats(0.0, model), std::invalid_argument);
  CHECK_THROWS_AS(model_stats(1.2, model), std::invalid_argument);
}

TEST_CASE("closed-form optimal retention matches brute-force grid search") {
  const auto model = demo_model();
  const EnsembleSpec ens{10};

  const double alpha_star = optimal_alpha(model, ens);
  CHECK(alpha_star == doctest::Approx(0.955).epsilon(1e-12));
  CHECK(optimal_dropout(model, ens) == doctest::Approx(0.045).epsilon(1e-12));

  CHECK(std::abs(grid_argmin(model, ens, 1e-5) - alpha_star) <= 1e-5 + 1e-12);

  // Single-member ensembles gain nothing from dropping features.
  CHECK(optimal_alpha(model, EnsembleSpec{1}) == 1.0);

  testgen::Rng rng(21);
  for (int i = 0; i < 25; ++i) {
    const EnsembleSpec e{testgen::uniform_int(rng, 2, 64)};
    const auto m = testgen::random_admissible_model(rng, e);
    CHECK(std::abs(grid_argmin(m, e, 1e-4) - optimal_alpha(m, e)) <= 1e-4 + 1e-12);
  }
}

TEST_CASE("gain decomposition totals the minimal ensemble error") {
  const auto model = demo_model();
  const EnsembleSpec ens{10};
  const auto gains = minimal_ensemble_error(model, ens);

  CHECK(gains.base_diversity_gain == doctest::Approx(0.018).epsilon(1e-12));
  CHECK(gains.dropout_gain == doctest::Approx(0.0002025).epsilon(1e-12));
  CHECK(gains.minimal_error == doctest::Approx(0.1817975).epsilon(1e-12));

  // Decomposition consistency: the closed form equals the curve at its optimum,
  // and full retention leaves exactly the dropout gain on the table.
  CHECK(gains.minimal_error ==
        doctest::Approx(ensemble_error_alpha(optimal_alpha(model, ens), model, ens))
            .epsilon(1e-12));
  CHECK(ensemble_error_alpha(1.0, model, ens) - gains.dropout_gain ==
        doctest::Approx(gains.minimal_error).epsilon(1e-12));

  testgen::Rng rng(22);
  for (int i = 0; i < 300; ++i) {
    const EnsembleSpec e{testgen::uniform_int(rng, 2, 64)};
    const auto m = testgen::random_admissible_model(rng, e);
    const auto g = minimal_ensemble_error(m, e);
    CHECK(g.minimal_error ==
          doctest::Approx(ensemble_error_alpha(optimal_alpha(m, e), m, e)).epsilon(1e-12));
    CHECK(g.minimal_error == doctest::Approx(m.base_error - g.base_diversity_gain -
                                             g.dropout_gain));
  }
}

TEST_CASE("optimal dropout scales with the diversity shrink factor") {
  testgen::Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    const EnsembleSpec ma{testgen::uniform_int(rng, 2, 128)};
    const EnsembleSpec mb{testgen::uniform_int(rng, 2, 128)};
    const auto model = testgen::random_admissible_model(rng, ma);
    if (!is_admissible(model, mb)) continue;
    const double ratio = optimal_dropout(model, ma) / optimal_dropout(model, mb);
    CHECK(ratio == doctest::Approx(ma.shrink_factor() / mb.shrink_factor()).epsilon(1e-13));
  }
}

TEST_CASE("retention curve is convex with a single interior minimum") {
  testgen::Rng rng(24);
  for (int i = 0; i < 100; ++i) {
    const EnsembleSpec ens{testgen::uniform_int(rng, 2, 32)};
    const auto model = testgen::random_admissible_model(rng, ens);
    const double alpha_star = optimal_alpha(model, ens);
    const double delta = 1e-3;
    const double at_star = ensemble_error_alpha(alpha_star, model, ens);
    if (alpha_star - delta > 0.0)
      CHECK(ensemble_error_alpha(alpha_star - delta, model, ens) > at_star);
    if (alpha_star + delta <= 1.0)
      CHECK(ensemble_error_alpha(alpha_star + delta, model, ens) > at_star);

    // Descending toward the optimum from both sides on a coarse grid.
    double prev = ensemble_error_alpha(std::max(alpha_star / 8, 1e-3), model, ens);
    for (double f : {0.25, 0.5, 0.75}) {
      const double a = std::max(alpha_star * (f + 0.125), 1e-3);
      const double v = ensemble_error_alpha(a, model, ens);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("inadmissible models are rejected instead of clamped") {
  // Optimum pushed out of (0, 1]: the local curves cannot be trusted there.
  BaggingModeld runaway{0.2, 0.001, -0.2, 0.6, 0.05};
  CHECK_THROWS_AS(optimal_alpha(runaway, EnsembleSpec{10}), std::domain_error);
  CHECK(!is_admissible(runaway, EnsembleSpec{10}));

  // Optimum inside (0, 1] but the correlation curve leaves [-1, 1] there.
  BaggingModeld steep{0.2, 1.35, -30.0, 0.6, 0.05};
  const double alpha = optimal_alpha(steep, EnsembleSpec{10});
  CHECK(alpha > 0.0);
  CHECK(alpha < 1.0);
  CHECK(model_stats(alpha, steep).correlation < -1.0);
  CHECK(!is_admissible(steep, EnsembleSpec{10}));
  CHECK_THROWS_AS(minimal_ensemble_error(steep, EnsembleSpec{10}), std::domain_error);

  CHECK_THROWS_AS(validate(BaggingModeld{0.2, -0.1, -0.2, 0.6, 0.05}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate(BaggingModeld{0.2, 0.1, 0.2, 0.6, 0.05}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate(BaggingModeld{0.2, 0.1, -0.2, 0.6, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("the optimum passes the acceptance gate from any worse retention") {
  const auto model = demo_model();
  const EnsembleSpec ens{10};
  for (const double alpha_old : {1.0, 0.9, 0.5})
    CHECK(verify_monotonic_at_optimum(model, ens, alpha_old));

  CHECK_THROWS_AS(verify_monotonic_at_optimum(model, ens, optimal_alpha(model, ens)),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_monotonic_at_optimum(model, EnsembleSpec{1}, 0.5),
                  std::domain_error);

  testgen::Rng rng(25);
  for (int i = 0; i < 200; ++i) {
    const EnsembleSpec e{testgen::uniform_int(rng, 2, 64)};
    const auto m = testgen::random_admissible_model(rng, e);
    for (const double alpha_old : {1.0, 0.9, 0.5})
      CHECK(verify_monotonic_at_optimum(m, e, alpha_old));
  }
}
