#pragma once

#include "ens/moments.hpp"
#include "ens/simulator.hpp"
#include "ens/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ens {

/// Two independently seeded trainings of one architecture, scored on a shared
/// probe batch.
template <typename Scalar = double>
struct DualProxySample {
  Eigen::Vector<Scalar, Eigen::Dynamic> first;
  Eigen::Vector<Scalar, Eigen::Dynamic> second;
  Eigen::Vector<Scalar, Eigen::Dynamic> labels;

  Eigen::Index sample_count() const { return labels.size(); }
};

using DualProxySampled = DualProxySample<double>;

template <typename Scalar>
void validate(const DualProxySample<Scalar>& s) {
  if (s.first.size() != s.labels.size() || s.second.size() != s.labels.size())
    throw std::invalid_argument("DualProxySample: proxy/label size mismatch");
  if (s.labels.size() < 2)
    throw std::invalid_argument("DualProxySample: need at least 2 samples");
}

template <typename Scalar = double>
struct EstimatedStats {
  ArchitectureStats<Scalar> stats;
  Eigen::Index sample_count = 0;
  bool degenerate_rho = false;  // a proxy was constant over the batch
};

using EstimatedStatsd = EstimatedStats<double>;

/// Batch moment estimates from a single dual training:
///   error       mean of the two proxy MSEs
///   variance    mean of (first - second)^2 / 2, the unbiased two-point form
///   correlation sample Pearson of the two prediction vectors, 0 with the
///               degenerate flag set when either vector is constant
///
/// Population targets on an equicorrelated pair with deviation variance
/// sigma^2, deviation correlation rho_dev, and per-input signal variance v:
///   error       -> expected single-model error
///   variance    -> sigma^2 (1 - rho_dev); recovers sigma^2 exactly when the
///                  two trainings have uncorrelated deviations
///   correlation -> (v + rho_dev sigma^2) / (v + sigma^2), the prediction-level
///                  correlation, which folds shared input signal into rho_dev
template <typename Scalar>
EstimatedStats<Scalar> estimate_stats(const DualProxySample<Scalar>& s) {
  validate(s);
  EstimatedStats<Scalar> out;
  out.sample_count = s.sample_count();
  out.stats.expected_error = (mean_squared_error(s.first, s.labels) +
                              mean_squared_error(s.second, s.labels)) /
                             Scalar(2);
  out.stats.variance = (s.first - s.second).array().square().mean() / Scalar(2);
  const auto r = pearson(s.first, s.second);
  if (r) {
    out.stats.correlation = *r;
  } else {
    out.stats.correlation = Scalar(0);
    out.degenerate_rho = true;
  }
  return out;
}

/// Error delta of an estimated candidate against the current baseline,
/// candidate minus baseline (negative = candidate improves).
template <typename Scalar>
Scalar estimate_delta_error(const EstimatedStats<Scalar>& candidate,
                            const ArchitectureStats<Scalar>& baseline) {
  return candidate.stats.expected_error - baseline.expected_error;
}

/// Estimates reshaped for the closed-form laws at a given ensemble size.
/// The Pearson estimate lives in [-1, 1] but the equicorrelated model only
/// admits rho >= -1/(M-1), so the correlation is clamped to that range.
template <typename Scalar>
ArchitectureStats<Scalar> to_architecture_stats(const EstimatedStats<Scalar>& est,
                                                int ensemble_size) {
  ArchitectureStats<Scalar> stats = est.stats;
  const Scalar lo = equicorrelation_lower_bound<Scalar>(ensemble_size);
  stats.correlation = std::clamp(stats.correlation, lo, Scalar(1));
  return stats;
}

/// Pearson correlation of the two proxies' deviations about a known
/// mean-prediction vector. Isolates seed-level correlation from the shared
/// input signal that inflates the prediction-level estimate. (Deviations
/// about the pairwise mean are useless here: they are exact negatives of
/// each other, so their correlation is identically -1.)
template <typename Scalar>
std::optional<Scalar> deviation_correlation(
    const DualProxySample<Scalar>& s,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& mean_prediction) {
  validate(s);
  if (mean_prediction.size() != s.labels.size())
    throw std::invalid_argument("deviation_correlation: mean prediction size mismatch");
  return pearson((s.first - mean_prediction).eval(), (s.second - mean_prediction).eval());
}

/// First two learners of a generated ensemble, viewed as a dual training.
template <typename Scalar>
DualProxySample<Scalar> to_dual_sample(const PredictionMatrix<Scalar>& pm) {
  validate(pm);
  if (pm.ensemble_size() < 2)
    throw std::invalid_argument("to_dual_sample: need at least 2 learners");
  DualProxySample<Scalar> s;
  s.first = pm.predictions.row(0).transpose();
  s.second = pm.predictions.row(1).transpose();
  s.labels = pm.labels;
  return s;
}

/// Per-replication perturbation of the generator targets, so that the truth
/// the estimator chases actually varies across replications.
template <typename Scalar = double>
struct FidelityJitter {
  Scalar variance_rel{0.2};     // on sigma^2
  Scalar bias_rel{0.2};         // on bias^2; error jitter follows from both
  Scalar correlation_abs{0.1};  // clamped to the pair-feasible range
};

template <typename Scalar = double>
struct FidelityRow {
  Eigen::Index sample_count = 0;
  bool small_sample_regime = false;  // batches under 30 points
  Scalar bias_error{};
  Scalar rmse_error{};
  Scalar bias_variance{};
  Scalar rmse_variance{};
  Scalar bias_correlation{};
  Scalar rmse_correlation{};
  Scalar error_tracking_correlation{};   // est. error vs true ensemble error
  Scalar mean_prediction_correlation{};  // raw Pearson across the dual
  Scalar mean_deviation_correlation{};   // Pearson about the true means
};

template <typename Scalar = double>
struct FidelityReport {
  int replications = 0;
  int ensemble_size = 0;  // M used when applying the ensemble error law
  FidelityJitter<Scalar> jitter;
  std::vector<FidelityRow<Scalar>> rows;
};

/// Replicated end-to-end measurement of the dual-training estimator against
/// the generator's known targets, per probe batch size. Biases are reported
/// against the true (error, variance, correlation) triple: the variance
/// estimate carries a known (1 - rho) shrink and the correlation estimate
/// folds in shared input signal, and this report is where both show up as
/// numbers. Tracking correlation pairs the estimated single-model error with
/// the true ensemble error across replications.
template <typename Scalar>
FidelityReport<Scalar> estimation_fidelity_report(
    const SimConfig<Scalar>& cfg, const std::vector<Eigen::Index>& sample_grid,
    int replications, const FidelityJitter<Scalar>& jitter = {}) {
  if (replications < 2)
    throw std::invalid_argument("estimation_fidelity_report: need >= 2 replications");
  if (sample_grid.empty())
    throw std::invalid_argument("estimation_fidelity_report: empty batch size grid");
  validate(cfg);

  const Scalar noise = irreducible_noise(cfg);
  const Scalar base_bias_sq = cfg.target_error - noise - cfg.target_variance;
  const Scalar rho_lo = Scalar(-1) + Scalar(1e-9);
  const EnsembleSpec ens{cfg.ensemble_size};

  FidelityReport<Scalar> report;
  report.replications = replications;
  report.ensemble_size = cfg.ensemble_size;
  report.jitter = jitter;

  for (std::size_t g = 0; g < sample_grid.size(); ++g) {
    const Eigen::Index n = sample_grid[g];
    if (n < 2)
      throw std::invalid_argument("estimation_fidelity_report: batch sizes must be >= 2");

    FidelityRow<Scalar> row;
    row.sample_count = n;
    row.small_sample_regime = n < 30;

    std::vector<Scalar> est_errors, true_ens_errors;
    long long dev_count = 0, pred_count = 0;

    for (int rep = 0; rep < replications; ++rep) {
      // Jitter depends only on the replication, so every batch size sees the
      // same sequence of perturbed truths.
      auto jit = make_engine(derive_seed(cfg.rng_seed, 0xf1d3u, static_cast<std::uint64_t>(rep)));
      std::uniform_real_distribution<Scalar> unit(Scalar(-1), Scalar(1));

      SimConfig<Scalar> rep_cfg = cfg;
      rep_cfg.ensemble_size = 2;
      rep_cfg.sample_count = n;
      rep_cfg.target_variance =
          cfg.target_variance * (Scalar(1) + jitter.variance_rel * unit(jit));
      const Scalar bias_sq = std::max(
          Scalar(0), base_bias_sq * (Scalar(1) + jitter.bias_rel * unit(jit)));
      rep_cfg.target_error = noise + rep_cfg.target_variance + bias_sq;
      rep_cfg.target_correlation =
          std::clamp(cfg.target_correlation + jitter.correlation_abs * unit(jit),
                     rho_lo, Scalar(1));
      rep_cfg.rng_seed = derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(g) + 1,
                                     static_cast<std::uint64_t>(rep));

      const auto truth = build_with_ground_truth(rep_cfg);
      const auto dual = to_dual_sample(truth.matrix);
      const auto est = estimate_stats(dual);

      const Scalar de = est.stats.expected_error - rep_cfg.target_error;
      const Scalar dv = est.stats.variance - rep_cfg.target_variance;
      const Scalar dr = est.stats.correlation - rep_cfg.target_correlation;
      row.bias_error += de;
      row.rmse_error += de * de;
      row.bias_variance += dv;
      row.rmse_variance += dv * dv;
      row.bias_correlation += dr;
      row.rmse_correlation += dr * dr;
      if (!est.degenerate_rho) {
        row.mean_prediction_correlation += est.stats.correlation;
        ++pred_count;
      }
      if (const auto dc = deviation_correlation(dual, truth.mean_prediction)) {
        row.mean_deviation_correlation += *dc;
        ++dev_count;
      }
      est_errors.push_back(est.stats.expected_error);
      true_ens_errors.push_back(ensemble_error_homogeneous(
          ArchitectureStats<Scalar>{rep_cfg.target_error, rep_cfg.target_variance,
                                    rep_cfg.target_correlation},
          ens));
    }

    const auto r = static_cast<Scalar>(replications);
    row.bias_error /= r;
    row.bias_variance /= r;
    row.bias_correlation /= r;
    row.rmse_error = std::sqrt(row.rmse_error / r);
    row.rmse_variance = std::sqrt(row.rmse_variance / r);
    row.rmse_correlation = std::sqrt(row.rmse_correlation / r);
    if (pred_count > 0)
      row.mean_prediction_correlation /= static_cast<Scalar>(pred_count);
    if (dev_count > 0) row.mean_deviation_correlation /= static_cast<Scalar>(dev_count);

    Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>> est_v(
        est_errors.data(), static_cast<Eigen::Index>(est_errors.size()));
    Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>> true_v(
        true_ens_errors.data(), static_cast<Eigen::Index>(true_ens_errors.size()));
    row.error_tracking_correlation = pearson(est_v, true_v).value_or(Scalar(0));

    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ens
