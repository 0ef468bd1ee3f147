#pragma once

#include <stdexcept>
#include <string>

namespace ens {

/// Architecture-level statistics under the homogeneity assumption: every
/// ensemble member is an independent training realization of one architecture,
/// so a single (expected error, variance, pairwise correlation) triple
/// characterizes the whole ensemble.
template <typename Scalar = double>
struct ArchitectureStats {
  Scalar expected_error{};  // single-model MSE, >= 0
  Scalar variance{};        // prediction variance, >= 0
  Scalar correlation{};     // pairwise correlation, in [-1, 1]
};

using ArchitectureStatsd = ArchitectureStats<double>;
using ArchitectureStatsf = ArchitectureStats<float>;

/// Uniform-average ensemble of a fixed member count.
struct EnsembleSpec {
  int size = 1;

  /// (M-1)/M, the diversity shrink factor.
  template <typename Scalar = double>
  Scalar shrink_factor() const {
    return static_cast<Scalar>(size - 1) / static_cast<Scalar>(size);
  }
};

/// Search/deployment cost accounting: n_trials candidate evaluations against
/// an M-member deployed ensemble.
template <typename Scalar = double>
struct CostModel {
  long long n_trials = 1;        // candidate evaluations, >= 1
  int ensemble_size = 1;         // deployed members M, >= 1
  Scalar learner_cost{1};        // cost of training one learner, > 0
  Scalar estimation_cost{0};     // per-candidate statistics overhead, >= 0
};

using CostModeld = CostModel<double>;

template <typename Scalar>
void validate(const ArchitectureStats<Scalar>& s) {
  if (!(s.expected_error >= Scalar(0)))
    throw std::invalid_argument("ArchitectureStats: expected_error must be >= 0");
  if (!(s.variance >= Scalar(0)))
    throw std::invalid_argument("ArchitectureStats: variance must be >= 0");
  if (!(s.correlation >= Scalar(-1) && s.correlation <= Scalar(1)))
    throw std::invalid_argument("ArchitectureStats: correlation must be in [-1, 1]");
}

inline void validate(const EnsembleSpec& ens) {
  if (ens.size < 1) throw std::invalid_argument("EnsembleSpec: size must be >= 1");
}

template <typename Scalar>
void validate(const CostModel<Scalar>& cm) {
  if (cm.n_trials < 1) throw std::invalid_argument("CostModel: n_trials must be >= 1");
  if (cm.ensemble_size < 1) throw std::invalid_argument("CostModel: ensemble_size must be >= 1");
  if (!(cm.learner_cost > Scalar(0)))
    throw std::invalid_argument("CostModel: learner_cost must be > 0");
  if (!(cm.estimation_cost >= Scalar(0)))
    throw std::invalid_argument("CostModel: estimation_cost must be >= 0");
}

/// Smallest pairwise correlation for which the M-member equicorrelation
/// matrix sigma^2 [(1-rho) I + rho J] stays positive semidefinite.
template <typename Scalar = double>
Scalar equicorrelation_lower_bound(int ensemble_size) {
  if (ensemble_size < 2) return Scalar(-1);
  return Scalar(-1) / static_cast<Scalar>(ensemble_size - 1);
}

/// Soft feasibility check: false means these stats cannot be realized by any
/// M-member equicorrelated ensemble. The simulator treats this as a hard
/// construction error; closed-form callers may still evaluate the formulas.
template <typename Scalar>
bool compatible_with_ensemble(const ArchitectureStats<Scalar>& s, const EnsembleSpec& ens) {
  return s.correlation >= equicorrelation_lower_bound<Scalar>(ens.size);
}

/// Ensemble MSE of M homogeneous members:
///   E - sigma^2 * ((M-1)/M) * (1 - rho).
/// Total for any valid stats; at M=1 (or rho=1) it degenerates to E.
template <typename Scalar>
Scalar ensemble_error_homogeneous(const ArchitectureStats<Scalar>& stats,
                                  const EnsembleSpec& ens) {
  const Scalar shrink = ens.shrink_factor<Scalar>();
  return stats.expected_error -
         stats.variance * shrink * (Scalar(1) - stats.correlation);
}

/// Ensemble MSE in bias/variance form for a Bernoulli(p) target:
///   p(1-p) + bias^2 + (sigma^2/M) * [1 + (M-1) rho].
template <typename Scalar>
Scalar ensemble_error_bias_variance(Scalar label_rate, Scalar bias_squared, Scalar variance,
                                    Scalar correlation, int ensemble_size) {
  const Scalar m = static_cast<Scalar>(ensemble_size);
  return label_rate * (Scalar(1) - label_rate) + bias_squared +
         variance / m * (Scalar(1) + (m - Scalar(1)) * correlation);
}

/// Expected average ambiguity (mean squared deviation of members from the
/// ensemble mean): sigma^2 (M-1)(1-rho) / M.
template <typename Scalar>
Scalar average_ambiguity(Scalar variance, Scalar correlation, int ensemble_size) {
  const Scalar m = static_cast<Scalar>(ensemble_size);
  return variance * (m - Scalar(1)) * (Scalar(1) - correlation) / m;
}

/// Correlation threshold of the monotonic acceptance gate:
///   rho_old - (M/(M-1)) * delta_error / candidate_variance,
/// with delta_error = E(candidate) - E(baseline) (negative = more accurate).
/// A candidate whose correlation lies strictly below this threshold yields a
/// lower ensemble error, assuming its variance matches the baseline's.
/// Undefined at M=1 or zero candidate variance; both throw.
template <typename Scalar>
Scalar monotonic_threshold(const ArchitectureStats<Scalar>& baseline, Scalar delta_error,
                           Scalar candidate_variance, const EnsembleSpec& ens) {
  if (ens.size < 2)
    throw std::domain_error("monotonic_threshold: gate requires ensemble size >= 2");
  if (!(candidate_variance > Scalar(0)))
    throw std::domain_error("monotonic_threshold: candidate variance must be > 0");
  const Scalar m = static_cast<Scalar>(ens.size);
  return baseline.correlation - m / (m - Scalar(1)) * delta_error / candidate_variance;
}

/// Acceptance gate under the variance-stability simplification: accept iff
/// the candidate's correlation is strictly below monotonic_threshold.
/// Sufficient (not necessary) for improvement when variances drift.
template <typename Scalar>
bool gate_simplified(const ArchitectureStats<Scalar>& candidate,
                     const ArchitectureStats<Scalar>& baseline, const EnsembleSpec& ens) {
  const Scalar delta_error = candidate.expected_error - baseline.expected_error;
  return candidate.correlation <
         monotonic_threshold(baseline, delta_error, candidate.variance, ens);
}

/// Exact acceptance gate, no variance-stability assumption: accept iff
///   sigma_new^2 (1-rho_new) > sigma_old^2 (1-rho_old) + (M/(M-1)) * delta_error.
/// Equivalent to ensemble_error_delta < 0.
template <typename Scalar>
bool gate_general(const ArchitectureStats<Scalar>& candidate,
                  const ArchitectureStats<Scalar>& baseline, const EnsembleSpec& ens) {
  if (ens.size < 2)
    throw std::domain_error("gate_general: gate requires ensemble size >= 2");
  const Scalar m = static_cast<Scalar>(ens.size);
  const Scalar delta_error = candidate.expected_error - baseline.expected_error;
  return candidate.variance * (Scalar(1) - candidate.correlation) >
         baseline.variance * (Scalar(1) - baseline.correlation) +
             m / (m - Scalar(1)) * delta_error;
}

/// Change in homogeneous ensemble error when switching baseline -> candidate.
template <typename Scalar>
Scalar ensemble_error_delta(const ArchitectureStats<Scalar>& candidate,
                            const ArchitectureStats<Scalar>& baseline,
                            const EnsembleSpec& ens) {
  return ensemble_error_homogeneous(candidate, ens) -
         ensemble_error_homogeneous(baseline, ens);
}

/// Full-ensemble validation cost: every candidate trains all M members.
template <typename Scalar>
Scalar cost_traditional(const CostModel<Scalar>& cm) {
  return static_cast<Scalar>(cm.n_trials) * static_cast<Scalar>(cm.ensemble_size) *
         cm.learner_cost;
}

/// Decoupled cost: one learner plus statistics estimation per candidate,
/// full ensemble training once for the winner.
template <typename Scalar>
Scalar cost_ours(const CostModel<Scalar>& cm) {
  return static_cast<Scalar>(cm.n_trials) * (cm.learner_cost + cm.estimation_cost) +
         static_cast<Scalar>(cm.ensemble_size) * cm.learner_cost;
}

/// traditional / ours; approaches M as n_trials grows.
template <typename Scalar>
Scalar cost_reduction_factor(const CostModel<Scalar>& cm) {
  return cost_traditional(cm) / cost_ours(cm);
}

}  // namespace ens
