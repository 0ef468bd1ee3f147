#pragma once

#include "ens/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace ens {

/// Local model of a feature-bagging family around full retention (alpha = 1):
/// dropping features raises single-model error quadratically and lowers
/// pairwise correlation linearly, at constant variance:
///   E(alpha)     = base_error + error_curvature * (1-alpha)^2
///   rho(alpha)   = base_correlation + decorrelation_slope * (1-alpha)
///   sigma^2      = base_variance.
template <typename Scalar = double>
struct BaggingModel {
  Scalar base_error{};           // E at alpha = 1, >= 0
  Scalar error_curvature{};      // k1 > 0
  Scalar decorrelation_slope{};  // k2 < 0
  Scalar base_correlation{};     // rho at alpha = 1, in (-1, 1]
  Scalar base_variance{};        // > 0
};

using BaggingModeld = BaggingModel<double>;

/// Split of the minimal ensemble error into its two improvement sources.
/// minimal_error = base_error - base_diversity_gain - dropout_gain, exactly.
template <typename Scalar = double>
struct GainDecomposition {
  Scalar base_diversity_gain{};  // from inherent decorrelation (rho < 1)
  Scalar dropout_gain{};         // from operating at the optimal retention
  Scalar minimal_error{};
};

using GainDecompositiond = GainDecomposition<double>;

template <typename Scalar>
void validate(const BaggingModel<Scalar>& model) {
  if (!(model.base_error >= Scalar(0)))
    throw std::invalid_argument("BaggingModel: base_error must be >= 0");
  if (!(model.error_curvature > Scalar(0)))
    throw std::invalid_argument("BaggingModel: error_curvature must be > 0");
  if (!(model.decorrelation_slope < Scalar(0)))
    throw std::invalid_argument("BaggingModel: decorrelation_slope must be < 0");
  if (!(model.base_correlation > Scalar(-1) && model.base_correlation <= Scalar(1)))
    throw std::invalid_argument("BaggingModel: base_correlation must be in (-1, 1]");
  if (!(model.base_variance > Scalar(0)))
    throw std::invalid_argument("BaggingModel: base_variance must be > 0");
}

/// Architecture statistics of the family member with retention ratio alpha.
template <typename Scalar>
ArchitectureStats<Scalar> model_stats(Scalar alpha, const BaggingModel<Scalar>& model) {
  if (!(alpha > Scalar(0) && alpha <= Scalar(1)))
    throw std::invalid_argument("model_stats: alpha must be in (0, 1]");
  const Scalar dropped = Scalar(1) - alpha;
  return ArchitectureStats<Scalar>{
      model.base_error + model.error_curvature * dropped * dropped,
      model.base_variance,
      model.base_correlation + model.decorrelation_slope * dropped,
  };
}

/// Ensemble error of the alpha member; identical to evaluating the
/// homogeneous error law on model_stats(alpha).
template <typename Scalar>
Scalar ensemble_error_alpha(Scalar alpha, const BaggingModel<Scalar>& model,
                            const EnsembleSpec& ens) {
  return ensemble_error_homogeneous(model_stats(alpha, model), ens);
}

/// Retention ratio minimizing the ensemble error:
///   alpha* = 1 + sigma^2 (M-1) k2 / (2 k1 M).
/// Exactly 1 at M=1 (no ensemble, dropout only hurts). Throws when the model
/// pushes alpha* out of (0, 1] -- the local curves are not trustworthy there.
template <typename Scalar>
Scalar optimal_alpha(const BaggingModel<Scalar>& model, const EnsembleSpec& ens) {
  if (ens.size == 1) return Scalar(1);
  const Scalar m = static_cast<Scalar>(ens.size);
  const Scalar alpha = Scalar(1) + model.base_variance * (m - Scalar(1)) *
                                       model.decorrelation_slope /
                                       (Scalar(2) * model.error_curvature * m);
  if (!(alpha > Scalar(0)))
    throw std::domain_error("optimal_alpha: model inadmissible, optimum not in (0, 1]");
  return alpha;
}

/// Optimal dropout rate beta* = 1 - alpha*.
template <typename Scalar>
Scalar optimal_dropout(const BaggingModel<Scalar>& model, const EnsembleSpec& ens) {
  return Scalar(1) - optimal_alpha(model, ens);
}

/// A model is admissible at M when alpha* lands in (0, 1] and the correlation
/// curve stays inside [-1, 1] at the optimum. Correlations are deliberately
/// never clamped; clamping would break the closed forms.
template <typename Scalar>
bool is_admissible(const BaggingModel<Scalar>& model, const EnsembleSpec& ens) {
  validate(model);
  validate(ens);
  Scalar alpha;
  try {
    alpha = optimal_alpha(model, ens);
  } catch (const std::domain_error&) {
    return false;
  }
  const Scalar rho = model_stats(alpha, model).correlation;
  return rho >= Scalar(-1) && rho <= Scalar(1);
}

template <typename Scalar>
void require_admissible(const BaggingModel<Scalar>& model, const EnsembleSpec& ens) {
  if (!is_admissible(model, ens))
    throw std::domain_error("BaggingModel: inadmissible at this ensemble size");
}

/// Minimal ensemble error and its gain split:
///   base diversity gain = sigma^2 (1-rho0) (M-1)/M
///   dropout gain        = sigma^4 k2^2 / (4 k1) * (1 - 1/M)^2.
/// Agrees with ensemble_error_alpha(optimal_alpha) to ~1e-12.
template <typename Scalar>
GainDecomposition<Scalar> minimal_ensemble_error(const BaggingModel<Scalar>& model,
                                                 const EnsembleSpec& ens) {
  require_admissible(model, ens);
  const Scalar m = static_cast<Scalar>(ens.size);
  const Scalar shrink = (m - Scalar(1)) / m;
  const Scalar k2 = model.decorrelation_slope;
  GainDecomposition<Scalar> out;
  out.base_diversity_gain =
      model.base_variance * (Scalar(1) - model.base_correlation) * shrink;
  out.dropout_gain = model.base_variance * model.base_variance * k2 * k2 /
                     (Scalar(4) * model.error_curvature) * shrink * shrink;
  out.minimal_error = model.base_error - out.base_diversity_gain - out.dropout_gain;
  return out;
}

/// Evaluate the acceptance gate for the closed-form optimum against a
/// suboptimal retention ratio. True for every admissible model: the optimum
/// strictly lowers the ensemble error, and the family has constant variance,
/// so the simplified gate is exact here.
template <typename Scalar>
bool verify_monotonic_at_optimum(const BaggingModel<Scalar>& model, const EnsembleSpec& ens,
                                 Scalar alpha_old) {
  if (ens.size < 2)
    throw std::domain_error("verify_monotonic_at_optimum: requires ensemble size >= 2");
  if (!(alpha_old > Scalar(0) && alpha_old <= Scalar(1)))
    throw std::invalid_argument("verify_monotonic_at_optimum: alpha_old must be in (0, 1]");
  const Scalar alpha_star = optimal_alpha(model, ens);
  if (alpha_old == alpha_star)
    throw std::invalid_argument(
        "verify_monotonic_at_optimum: alpha_old must differ from the optimum");
  return gate_simplified(model_stats(alpha_star, model), model_stats(alpha_old, model), ens);
}

}  // namespace ens
