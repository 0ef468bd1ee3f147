#pragma once

// Randomized fixtures shared by the unit and acceptance suites.

#include "ens/bagging.hpp"
#include "ens/stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace testgen {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline ens::ArchitectureStatsd random_stats(Rng& rng, double rho_lo = -1.0,
                                            double rho_hi = 1.0) {
  return ens::ArchitectureStatsd{uniform(rng, 0.05, 0.5), uniform(rng, 1e-4, 0.2),
                                 uniform(rng, rho_lo, rho_hi)};
}

/// Admissible bagging model for the given ensemble size. The optimum is kept
/// away from the retention grid {1.0, 0.9, 0.5} used as comparison points, so
/// strict-inequality checks never sit on a floating-point knife edge.
inline ens::BaggingModeld random_admissible_model(Rng& rng, const ens::EnsembleSpec& ens) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    ens::BaggingModeld model;
    model.base_error = uniform(rng, 0.05, 0.5);
    model.error_curvature = uniform(rng, 0.05, 0.5);
    model.decorrelation_slope = uniform(rng, -0.5, -0.01);
    model.base_correlation = uniform(rng, -0.2, 0.95);
    model.base_variance = uniform(rng, 0.005, 0.2);
    if (!ens::is_admissible(model, ens)) continue;
    const double alpha = ens::optimal_alpha(model, ens);
    if (alpha < 0.02 || alpha > 0.998) continue;
    bool near_grid = false;
    for (const double pin : {1.0, 0.9, 0.5})
      near_grid |= std::abs(alpha - pin) < 1e-3;
    if (near_grid) continue;
    return model;
  }
  throw std::runtime_error("random_admissible_model: rejection sampling exhausted");
}

}  // namespace testgen
