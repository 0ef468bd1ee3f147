#pragma once

#include "ens/moments.hpp"
#include "ens/rng.hpp"
#include "ens/stats.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ens {

enum class LabelModel {
  kConstantP,   // every label ~ Bernoulli(label_rate)
  kPerSampleP,  // per-sample rate p_i ~ Uniform(label_rate +- halfwidth)
};

inline const char* to_string(LabelModel m) {
  return m == LabelModel::kConstantP ? "constant_p" : "per_sample_p";
}

/// Ground-truth generator configuration: M equicorrelated learners with
/// prescribed single-model error, deviation variance and pairwise deviation
/// correlation, evaluated on n Bernoulli-labeled samples.
template <typename Scalar = double>
struct SimConfig {
  int ensemble_size = 2;
  Eigen::Index sample_count = 1000;
  Scalar target_error{0.25};
  Scalar target_variance{0.05};
  Scalar target_correlation{0};
  LabelModel label_model = LabelModel::kConstantP;
  Scalar label_rate{0.2};
  Scalar label_rate_halfwidth{0};  // per-sample model only
  std::uint64_t rng_seed = 0;
  bool clamp_predictions = false;  // excluded from formula validation
};

using SimConfigd = SimConfig<double>;

/// M x n learner predictions plus the n labels they were scored against.
template <typename Scalar = double>
struct PredictionMatrix {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> predictions;  // M x n
  Eigen::Vector<Scalar, Eigen::Dynamic> labels;                       // n

  int ensemble_size() const { return static_cast<int>(predictions.rows()); }
  Eigen::Index sample_count() const { return predictions.cols(); }
};

using PredictionMatrixd = PredictionMatrix<double>;

template <typename Scalar>
void validate(const PredictionMatrix<Scalar>& pm) {
  if (pm.predictions.rows() < 1)
    throw std::invalid_argument("PredictionMatrix: need at least one learner");
  if (pm.predictions.cols() != pm.labels.size())
    throw std::invalid_argument("PredictionMatrix: label/prediction size mismatch");
  if (pm.labels.size() < 2)
    throw std::invalid_argument("PredictionMatrix: need at least 2 samples");
}

/// Prediction matrix plus the generator's hidden state, for oracle checks.
template <typename Scalar = double>
struct EnsembleGroundTruth {
  PredictionMatrix<Scalar> matrix;
  Eigen::Vector<Scalar, Eigen::Dynamic> mean_prediction;  // mu_i = p_i + bias
  Scalar prediction_bias{};
  Scalar irreducible_noise{};  // E[p(1-p)]
  Scalar signal_variance{};    // Var(mu_i) across the input distribution
};

/// Mean of p_i(1-p_i) under the configured label model.
template <typename Scalar>
Scalar irreducible_noise(const SimConfig<Scalar>& cfg) {
  const Scalar p = cfg.label_rate;
  const Scalar h = cfg.label_model == LabelModel::kPerSampleP ? cfg.label_rate_halfwidth
                                                              : Scalar(0);
  // E[p(1-p)] = pbar(1-pbar) - Var(p), Var(U(p-h, p+h)) = h^2/3.
  return p * (Scalar(1) - p) - h * h / Scalar(3);
}

/// Variance of the mean prediction across the input distribution.
template <typename Scalar>
Scalar signal_variance(const SimConfig<Scalar>& cfg) {
  if (cfg.label_model != LabelModel::kPerSampleP) return Scalar(0);
  const Scalar h = cfg.label_rate_halfwidth;
  return h * h / Scalar(3);
}

/// Systematic prediction offset implied by the target triple:
///   bias^2 = E - E[p(1-p)] - sigma^2.
/// Throws when the triple is infeasible under the label model.
template <typename Scalar>
Scalar derived_bias(const SimConfig<Scalar>& cfg) {
  const Scalar bias_sq = cfg.target_error - irreducible_noise(cfg) - cfg.target_variance;
  if (bias_sq < Scalar(-1e-12))
    throw std::invalid_argument(
        "SimConfig: target triple inconsistent; target_error must cover label noise "
        "plus variance under this label model");
  return std::sqrt(std::max(bias_sq, Scalar(0)));
}

template <typename Scalar>
void validate(const SimConfig<Scalar>& cfg) {
  if (cfg.ensemble_size < 1)
    throw std::invalid_argument("SimConfig: ensemble_size must be >= 1");
  if (cfg.sample_count < 2)
    throw std::invalid_argument("SimConfig: sample_count must be >= 2");
  if (!(cfg.target_error >= Scalar(0)))
    throw std::invalid_argument("SimConfig: target_error must be >= 0");
  if (!(cfg.target_variance >= Scalar(0)))
    throw std::invalid_argument("SimConfig: target_variance must be >= 0");
  if (!(cfg.target_correlation <= Scalar(1)))
    throw std::invalid_argument("SimConfig: target_correlation must be <= 1");
  if (cfg.target_correlation <
      equicorrelation_lower_bound<Scalar>(cfg.ensemble_size) - Scalar(1e-12))
    throw std::invalid_argument(
        "SimConfig: target_correlation below -1/(M-1); equicorrelation matrix "
        "not positive semidefinite");
  const Scalar h =
      cfg.label_model == LabelModel::kPerSampleP ? cfg.label_rate_halfwidth : Scalar(0);
  if (h < Scalar(0))
    throw std::invalid_argument("SimConfig: label_rate_halfwidth must be >= 0");
  if (!(cfg.label_rate - h >= Scalar(0) && cfg.label_rate + h <= Scalar(1)))
    throw std::invalid_argument("SimConfig: label rate range must stay within [0, 1]");
  derived_bias(cfg);  // throws on inconsistent target triple
}

/// Draw the full generator state. Draw order is fixed and documented so a
/// config is bit-reproducible: per-sample rates (per-sample model only),
/// labels, then the shared factor followed by per-learner normals (rho >= 0)
/// or the raw normal block (rho < 0).
///
/// Deviations have per-sample covariance sigma^2 [(1-rho) I + rho J]:
///   rho >= 0: dev_m = sigma (sqrt(rho) z0 + sqrt(1-rho) z_m)
///   rho <  0: symmetric square root of the equicorrelation matrix,
///             dev = s2 z + (s1 - s2) zbar 1, with s1 = sigma sqrt(1+(M-1)rho),
///             s2 = sigma sqrt(1-rho).
template <typename Scalar>
EnsembleGroundTruth<Scalar> build_with_ground_truth(const SimConfig<Scalar>& cfg) {
  validate(cfg);
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  const int m = cfg.ensemble_size;
  const Eigen::Index n = cfg.sample_count;
  const Scalar sigma = std::sqrt(cfg.target_variance);
  const Scalar rho = cfg.target_correlation;
  const Scalar bias = derived_bias(cfg);

  auto engine = make_engine(cfg.rng_seed);
  std::uniform_real_distribution<Scalar> uniform(Scalar(0), Scalar(1));
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));

  Vector rates = Vector::Constant(n, cfg.label_rate);
  if (cfg.label_model == LabelModel::kPerSampleP && cfg.label_rate_halfwidth > Scalar(0)) {
    const Scalar h = cfg.label_rate_halfwidth;
    for (Eigen::Index i = 0; i < n; ++i)
      rates[i] = cfg.label_rate + h * (Scalar(2) * uniform(engine) - Scalar(1));
  }

  Vector labels(n);
  for (Eigen::Index i = 0; i < n; ++i)
    labels[i] = uniform(engine) < rates[i] ? Scalar(1) : Scalar(0);

  Matrix deviations(m, n);
  if (sigma == Scalar(0)) {
    deviations.setZero();
  } else if (rho >= Scalar(0)) {
    Vector shared(n);
    for (Eigen::Index i = 0; i < n; ++i) shared[i] = normal(engine);
    const Scalar w_shared = std::sqrt(rho);
    const Scalar w_own = std::sqrt(Scalar(1) - rho);
    for (int r = 0; r < m; ++r)
      for (Eigen::Index i = 0; i < n; ++i)
        deviations(r, i) = sigma * (w_shared * shared[i] + w_own * normal(engine));
  } else {
    const Scalar s1 =
        sigma * std::sqrt(std::max(Scalar(0), Scalar(1) + Scalar(m - 1) * rho));
    const Scalar s2 = sigma * std::sqrt(Scalar(1) - rho);
    Matrix z(m, n);
    for (int r = 0; r < m; ++r)
      for (Eigen::Index i = 0; i < n; ++i) z(r, i) = normal(engine);
    const auto col_means = z.colwise().mean();
    deviations = s2 * z;
    deviations.rowwise() += (s1 - s2) * col_means;
  }

  EnsembleGroundTruth<Scalar> out;
  out.mean_prediction = rates.array() + bias;
  out.prediction_bias = bias;
  out.irreducible_noise = irreducible_noise(cfg);
  out.signal_variance = signal_variance(cfg);
  out.matrix.labels = std::move(labels);
  out.matrix.predictions = deviations;
  out.matrix.predictions.rowwise() += out.mean_prediction.transpose();
  if (cfg.clamp_predictions)
    out.matrix.predictions =
        out.matrix.predictions.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  return out;
}

template <typename Scalar>
PredictionMatrix<Scalar> build_equicorrelated_ensemble(const SimConfig<Scalar>& cfg) {
  return build_with_ground_truth(cfg).matrix;
}

/// MSE of the row-averaged ensemble prediction against the labels.
template <typename Scalar>
Scalar empirical_ensemble_error(const PredictionMatrix<Scalar>& pm) {
  validate(pm);
  return mean_squared_error(pm.predictions.colwise().mean().transpose(), pm.labels);
}

template <typename Scalar = double>
struct DecompositionSample {
  Scalar average_single_error{};
  Scalar ambiguity{};
  Scalar ensemble_error{};
};

/// Per-dataset error/ambiguity split. average_single_error - ambiguity equals
/// ensemble_error as an algebraic identity (up to rounding), independent of
/// any distributional assumption.
template <typename Scalar>
DecompositionSample<Scalar> empirical_decomposition(const PredictionMatrix<Scalar>& pm) {
  validate(pm);
  const auto ens_mean = pm.predictions.colwise().mean().eval();  // 1 x n
  DecompositionSample<Scalar> out;
  const int m = pm.ensemble_size();
  const Eigen::Index n = pm.sample_count();
  for (int r = 0; r < m; ++r) {
    out.average_single_error += mean_squared_error(pm.predictions.row(r).transpose(), pm.labels);
    out.ambiguity += (pm.predictions.row(r) - ens_mean).array().square().sum() /
                     static_cast<Scalar>(n);
  }
  out.average_single_error /= static_cast<Scalar>(m);
  out.ambiguity /= static_cast<Scalar>(m);
  out.ensemble_error = mean_squared_error(ens_mean.transpose(), pm.labels);
  return out;
}

/// Mean sample Pearson correlation over all learner pairs, measured on
/// deviations from a known mean-prediction vector. Empty when every pair is
/// degenerate (zero deviation variance).
template <typename Scalar>
std::optional<Scalar> mean_pairwise_correlation(
    const PredictionMatrix<Scalar>& pm,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& mean_prediction) {
  validate(pm);
  const int m = pm.ensemble_size();
  if (m < 2) return std::nullopt;
  const auto centered =
      (pm.predictions.rowwise() - mean_prediction.transpose()).eval();
  Scalar sum{};
  long long pairs = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const auto r = pearson(centered.row(i).transpose(), centered.row(j).transpose());
      if (r) {
        sum += *r;
        ++pairs;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return sum / static_cast<Scalar>(pairs);
}

/// Correlation the dual-proxy batch estimator converges to on this config:
/// shared per-input signal plus deviation correlation, relative to total
/// prediction variance. Equals target_correlation under the constant-p model.
template <typename Scalar>
Scalar effective_correlation(const SimConfig<Scalar>& cfg) {
  const Scalar sv = signal_variance(cfg);
  const Scalar denom = sv + cfg.target_variance;
  if (denom == Scalar(0)) return Scalar(1);
  return (sv + cfg.target_correlation * cfg.target_variance) / denom;
}

template <typename Scalar = double>
struct QuantityCheck {
  std::string name;
  Scalar predicted{};
  Scalar empirical_mean{};
  Scalar std_error{};
  Scalar z_score{};
  bool flagged = false;
};

template <typename Scalar = double>
struct TrialStats {
  int trial = 0;
  std::uint64_t seed = 0;
  Scalar ensemble_error{};
  Scalar ambiguity{};
  Scalar mean_single_error{};
  Scalar mean_pair_correlation{};
  Scalar mean_learner_variance{};
};

template <typename Scalar = double>
struct ValidationReport {
  int trials = 0;
  Scalar prediction_bias{};
  Scalar irreducible_noise{};
  std::vector<QuantityCheck<Scalar>> checks;
  std::vector<TrialStats<Scalar>> per_trial;
  bool all_within_bounds = true;
};

namespace detail {

template <typename Scalar>
QuantityCheck<Scalar> summarize_check(const std::string& name, Scalar predicted,
                                      const std::vector<Scalar>& values) {
  QuantityCheck<Scalar> c;
  c.name = name;
  c.predicted = predicted;
  const auto n = static_cast<Scalar>(values.size());
  Scalar mean{};
  for (const Scalar v : values) mean += v;
  mean /= n;
  Scalar ss{};
  for (const Scalar v : values) ss += (v - mean) * (v - mean);
  const Scalar sd = values.size() > 1 ? std::sqrt(ss / (n - Scalar(1))) : Scalar(0);
  c.empirical_mean = mean;
  c.std_error = sd / std::sqrt(n);
  if (c.std_error > Scalar(0)) {
    c.z_score = (mean - predicted) / c.std_error;
  } else {
    c.z_score = std::abs(mean - predicted) <= Scalar(1e-12)
                    ? Scalar(0)
                    : std::numeric_limits<Scalar>::infinity();
  }
  c.flagged = !(std::abs(c.z_score) <= Scalar(4));
  return c;
}

}  // namespace detail

/// Replicated Monte-Carlo check of the closed-form moment predictions.
/// Each trial draws an independent ensemble (seed stream = trial index) and
/// measures ensemble error, ambiguity, pairwise deviation correlation, and
/// per-learner variance/error; z-scores compare trial means against the
/// closed forms, flagging |z| > 4.
template <typename Scalar>
ValidationReport<Scalar> validate_formula_suite(const SimConfig<Scalar>& cfg, int trials) {
  if (trials < 1) throw std::invalid_argument("validate_formula_suite: trials must be >= 1");
  if (cfg.clamp_predictions)
    throw std::invalid_argument(
        "validate_formula_suite: clamped predictions distort the target moments; "
        "disable clamping for formula validation");
  validate(cfg);

  const ArchitectureStats<Scalar> stats{cfg.target_error, cfg.target_variance,
                                        cfg.target_correlation};
  const EnsembleSpec ens{cfg.ensemble_size};
  const bool check_correlation = cfg.ensemble_size >= 2 && cfg.target_variance > Scalar(0);

  ValidationReport<Scalar> report;
  report.trials = trials;
  report.prediction_bias = derived_bias(cfg);
  report.irreducible_noise = irreducible_noise(cfg);

  std::vector<Scalar> errs, ambs, singles, corrs, vars;
  for (int t = 0; t < trials; ++t) {
    SimConfig<Scalar> trial_cfg = cfg;
    trial_cfg.rng_seed = derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(t));
    const auto truth = build_with_ground_truth(trial_cfg);
    const auto decomp = empirical_decomposition(truth.matrix);

    const auto centered =
        (truth.matrix.predictions.rowwise() - truth.mean_prediction.transpose()).eval();
    Scalar learner_var{};
    for (int r = 0; r < cfg.ensemble_size; ++r)
      learner_var += sample_variance(centered.row(r).transpose());
    learner_var /= static_cast<Scalar>(cfg.ensemble_size);

    TrialStats<Scalar> row;
    row.trial = t;
    row.seed = trial_cfg.rng_seed;
    row.ensemble_error = decomp.ensemble_error;
    row.ambiguity = decomp.ambiguity;
    row.mean_single_error = decomp.average_single_error;
    row.mean_learner_variance = learner_var;
    if (check_correlation) {
      const auto corr = mean_pairwise_correlation(truth.matrix, truth.mean_prediction);
      row.mean_pair_correlation = corr.value_or(Scalar(0));
      corrs.push_back(row.mean_pair_correlation);
    }
    report.per_trial.push_back(row);
    errs.push_back(row.ensemble_error);
    ambs.push_back(row.ambiguity);
    singles.push_back(row.mean_single_error);
    vars.push_back(learner_var);
  }

  report.checks.push_back(detail::summarize_check<Scalar>(
      "ensemble_error", ensemble_error_homogeneous(stats, ens), errs));
  report.checks.push_back(detail::summarize_check<Scalar>(
      "ambiguity",
      average_ambiguity(cfg.target_variance, cfg.target_correlation, cfg.ensemble_size),
      ambs));
  report.checks.push_back(
      detail::summarize_check<Scalar>("single_error", cfg.target_error, singles));
  report.checks.push_back(
      detail::summarize_check<Scalar>("learner_variance", cfg.target_variance, vars));
  if (check_correlation)
    report.checks.push_back(detail::summarize_check<Scalar>(
        "pairwise_correlation", cfg.target_correlation, corrs));

  for (const auto& c : report.checks) report.all_within_bounds &= !c.flagged;
  return report;
}

}  // namespace ens
