#include "ens/cli/commands.hpp"

#include "ens/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <utility>

namespace ens::cli {
namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json estimated_json(const EstimatedStatsd& e) {
  return {{"error", e.stats.expected_error},
          {"variance", e.stats.variance},
          {"correlation", e.stats.correlation},
          {"sample_count", static_cast<long long>(e.sample_count)},
          {"degenerate_rho", e.degenerate_rho}};
}

json descriptor_json(const CandidateDescriptor& d) {
  json payload = json::object();
  for (const auto& [key, value] : d.payload) payload[key] = value;
  return {{"id", d.id},
          {"complexity_bin", d.complexity_bin},
          {"payload", payload},
          {"proposer", d.proposer_name}};
}

// z-scores degenerate to infinity when a check has zero spread (single-trial
// runs); JSON has no infinity, so those serialize as null.
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json cell_json(const GateQualityCell& c) {
  return {{"considered", c.considered},
          {"accepted", c.accepted},
          {"accepted_truly_improving", c.accepted_truly_improving},
          {"rejected", c.rejected},
          {"rejected_truly_nonimproving", c.rejected_truly_nonimproving},
          {"accept_precision", c.accept_precision()},
          {"reject_precision", c.reject_precision()}};
}

json cmd_verify_theory(const RunConfig& cfg, int& exit_code) {
  if (cfg.sim.ensemble_size < 2)
    throw ConfigError("verify-theory requires sim.ensemble_size >= 2");
  const auto report = validate_formula_suite(cfg.sim, cfg.verify.trials);

  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"predicted", c.predicted},
                      {"empirical_mean", c.empirical_mean},
                      {"std_error", c.std_error},
                      {"z_score", finite_or_null(c.z_score)},
                      {"flagged", c.flagged}});
  json per_trial = json::array();
  for (const auto& t : report.per_trial)
    per_trial.push_back({{"trial", t.trial},
                         {"seed", t.seed},
                         {"ensemble_error", t.ensemble_error},
                         {"ambiguity", t.ambiguity},
                         {"mean_single_error", t.mean_single_error},
                         {"mean_pair_correlation", t.mean_pair_correlation},
                         {"mean_learner_variance", t.mean_learner_variance}});

  // Gate experiment: random baseline/candidate pairs, drawn above the noise
  // floor so every triple is realizable by the generator. The exact invariant
  // (gate verdict == sign of the closed-form error change) must never fail;
  // the empirical check simulates both sides and scores how often the verdict
  // matches finite-sample reality.
  const EnsembleSpec ens{cfg.sim.ensemble_size};
  auto engine = make_engine(derive_seed(cfg.top.seed, 0x6a7eu));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double noise = irreducible_noise(cfg.sim);
  auto draw_triple = [&]() {
    ArchitectureStatsd s;
    s.expected_error = noise + 0.04 + 0.10 * uniform(engine);
    const double var_hi = s.expected_error - noise - 0.001;
    s.variance = 0.02 + (var_hi - 0.02) * uniform(engine);
    s.correlation = 0.8 * uniform(engine);
    return s;
  };
  int exact_violations = 0;
  int empirical_matches = 0;
  for (int pair = 0; pair < cfg.verify.gate_pairs; ++pair) {
    const auto base = draw_triple();
    const auto cand = draw_triple();
    const bool accept = gate_general(cand, base, ens);
    if (accept != (ensemble_error_delta(cand, base, ens) < 0.0)) ++exact_violations;

    auto sim_for = [&](const ArchitectureStatsd& s, std::uint64_t stream) {
      SimConfigd c = cfg.sim;
      c.sample_count = cfg.verify.gate_sample_count;
      c.target_error = s.expected_error;
      c.target_variance = s.variance;
      c.target_correlation = s.correlation;
      c.rng_seed =
          derive_seed(cfg.top.seed, 0x6a7fu + stream, static_cast<std::uint64_t>(pair));
      return c;
    };
    const double emp_base =
        empirical_ensemble_error(build_equicorrelated_ensemble(sim_for(base, 0)));
    const double emp_cand =
        empirical_ensemble_error(build_equicorrelated_ensemble(sim_for(cand, 1)));
    if (accept == (emp_cand < emp_base)) ++empirical_matches;
  }
  const double agreement =
      static_cast<double>(empirical_matches) / static_cast<double>(cfg.verify.gate_pairs);

  const bool suite_ok = report.all_within_bounds;
  const bool exact_ok = exact_violations == 0;
  const bool empirical_ok = agreement >= cfg.verify.agreement_floor;
  json invariants = json::array();
  invariants.push_back({{"name", "formula_suite_within_bounds"}, {"pass", suite_ok}});
  invariants.push_back({{"name", "gate_exact_soundness"}, {"pass", exact_ok}});
  invariants.push_back({{"name", "gate_empirical_agreement"}, {"pass", empirical_ok}});
  const bool all_pass = suite_ok && exact_ok && empirical_ok;

  json results;
  results["formula_suite"] = {{"trials", report.trials},
                              {"prediction_bias", report.prediction_bias},
                              {"irreducible_noise", report.irreducible_noise},
                              {"all_within_bounds", report.all_within_bounds},
                              {"checks", checks},
                              {"per_trial", per_trial}};
  results["gate_experiment"] = {
      {"pairs", cfg.verify.gate_pairs},
      {"sample_count", static_cast<long long>(cfg.verify.gate_sample_count)},
      {"exact_violations", exact_violations},
      {"empirical_agreement", agreement},
      {"agreement_floor", cfg.verify.agreement_floor}};
  results["invariants"] = invariants;
  results["all_pass"] = all_pass;
  exit_code = all_pass ? 0 : 1;
  return results;
}

json cmd_optimize_alpha(const RunConfig& cfg) {
  const BaggingModeld& model = cfg.bagging.model;
  const EnsembleSpec ens{cfg.bagging.ensemble_size};
  try {
    require_admissible(model, ens);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bagging: ") + e.what());
  }
  const double alpha_star = optimal_alpha(model, ens);
  const auto gains = minimal_ensemble_error(model, ens);
  const double m = static_cast<double>(ens.size);

  json results;
  results["alpha_star"] = alpha_star;
  results["beta_star"] = optimal_dropout(model, ens);
  results["gains"] = {{"base_diversity_gain", gains.base_diversity_gain},
                      {"dropout_gain", gains.dropout_gain},
                      {"minimal_error", gains.minimal_error}};
  results["dropout_scale_factor"] = (1.0 - 1.0 / m) * (1.0 - 1.0 / m);
  results["ensemble_error_at_alpha_old"] =
      ensemble_error_alpha(cfg.bagging.alpha_old, model, ens);

  const int n = cfg.bagging.sweep_points;
  json alphas = json::array();
  json errors = json::array();
  double best = std::numeric_limits<double>::infinity();
  int argmin = 0;
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i + 1) / static_cast<double>(n);
    const double e = ensemble_error_alpha(a, model, ens);
    alphas.push_back(a);
    errors.push_back(e);
    if (e < best) {
      best = e;
      argmin = i;
    }
  }
  results["sweep"] = {{"points", n},
                      {"alpha", alphas},
                      {"ensemble_error", errors},
                      {"argmin_alpha", static_cast<double>(argmin + 1) / n},
                      {"min_error", best}};

  json monotonic;
  if (ens.size < 2) {
    monotonic = {{"gate_accepts_optimum", nullptr},
                 {"note", "gate undefined for single-member ensembles"}};
  } else if (cfg.bagging.alpha_old == alpha_star) {
    monotonic = {{"gate_accepts_optimum", nullptr},
                 {"note", "alpha_old coincides with the optimum"}};
  } else {
    monotonic = {{"gate_accepts_optimum",
                  verify_monotonic_at_optimum(model, ens, cfg.bagging.alpha_old)},
                 {"note", ""}};
  }
  results["monotonic"] = monotonic;
  return results;
}

json cmd_cost(const RunConfig& cfg) {
  const CostModeld& cm = cfg.cost.model;
  json results;
  results["traditional"] = cost_traditional(cm);
  results["ours"] = cost_ours(cm);
  results["reduction_factor"] = cost_reduction_factor(cm);
  results["asymptotic_factor"] = static_cast<double>(cm.ensemble_size) * cm.learner_cost /
                                 (cm.learner_cost + cm.estimation_cost);
  json sweep = json::array();
  for (long long n = 10; n <= 10'000'000LL; n *= 10) {
    CostModeld scaled = cm;
    scaled.n_trials = n;
    sweep.push_back({{"n_trials", n}, {"reduction_factor", cost_reduction_factor(scaled)}});
  }
  results["sweep"] = sweep;
  return results;
}

json cmd_search(const RunConfig& cfg, int& exit_code) {
  const SearchConfig& sc = cfg.search;
  const EnsembleSpec ens{sc.ensemble_size};

  std::unique_ptr<Proposer> proposer;
  ExternalProposer* external = nullptr;
  if (sc.proposer == "scripted") {
    proposer = std::make_unique<ScriptedProposer>(sc.scripted);
  } else if (sc.proposer == "random") {
    proposer = std::make_unique<RandomProposer>();
  } else {
    auto p = std::make_unique<ExternalProposer>(sc.proposer_url, sc.timeout_seconds);
    external = p.get();
    proposer = std::move(p);
  }

  std::unique_ptr<DualProxyEvaluator> evaluator;
  if (sc.evaluator == "simulated") {
    SimulatedEvaluatorOptions opts;
    opts.sample_count = sc.sample_count;
    opts.label_rate = sc.label_rate;
    evaluator = std::make_unique<SimulatedEvaluator>(opts);
  } else {
    evaluator = std::make_unique<ExactEvaluator>();
  }

  SearchOptions opts;
  opts.budget = sc.budget;
  opts.bin_count = sc.bin_count;
  opts.rng_seed = cfg.top.seed;
  opts.run_id = sc.run_id;
  const SearchTrace trace = run_monotonic_search(sc.baseline, ens, *proposer, *evaluator, opts);
  const AuditResult audit = audit_transitivity(trace, ens);

  json records = json::array();
  for (const auto& r : trace.records) {
    json rec;
    rec["iteration"] = r.iteration;
    rec["bin"] = r.bin;
    rec["descriptor"] = r.descriptor ? descriptor_json(*r.descriptor) : json(nullptr);
    rec["estimated"] = r.estimated ? estimated_json(*r.estimated) : json(nullptr);
    rec["baseline"] = to_json(r.baseline);
    rec["delta_error"] = r.estimated ? json(r.delta_error) : json(nullptr);
    rec["threshold"] = r.threshold ? json(*r.threshold) : json(nullptr);
    rec["gate_margin"] = (r.threshold && r.estimated)
                             ? json(*r.threshold - r.estimated->stats.correlation)
                             : json(nullptr);
    rec["accepted"] = r.accepted;
    rec["skipped"] = r.skipped;
    rec["reason"] = r.reason;
    rec["general_accepted"] = r.general_accepted ? json(*r.general_accepted) : json(nullptr);
    records.push_back(rec);
  }

  json audit_json;
  audit_json["pass"] = audit.pass;
  audit_json["message"] = audit.message;
  audit_json["initial_ensemble_error"] = audit.initial_ensemble_error;
  audit_json["final_ensemble_error"] = audit.final_ensemble_error;
  audit_json["failing_iteration"] =
      audit.failing_iteration ? json(*audit.failing_iteration) : json(nullptr);
  json links = json::array();
  for (const auto& l : audit.links)
    links.push_back({{"iteration", l.iteration},
                     {"error_before", l.error_before},
                     {"error_after", l.error_after},
                     {"margin", l.margin}});
  audit_json["links"] = links;

  json results;
  results["run_id"] = trace.run_id;
  results["budget"] = trace.budget;
  results["bin_count"] = trace.bin_count;
  results["ensemble_size"] = trace.ensemble_size;
  results["initial_best"] = to_json(trace.initial_best);
  results["final_best"] = to_json(trace.final_best);
  results["initial_ensemble_error"] = ensemble_error_homogeneous(trace.initial_best, ens);
  results["final_ensemble_error"] = ensemble_error_homogeneous(trace.final_best, ens);
  results["winner_iteration"] =
      trace.winner_iteration ? json(*trace.winner_iteration) : json(nullptr);
  results["accepted_count"] = trace.accepted_count;
  results["skipped_count"] = trace.skipped_count;
  results["acceptance_rate"] =
      static_cast<double>(trace.accepted_count) / static_cast<double>(trace.budget);
  results["proposer_calls"] = trace.proposer_calls;
  results["evaluator_calls"] = trace.evaluator_calls;
  results["records"] = records;
  results["audit"] = audit_json;
  results["trace_quality"] = cell_json(gate_quality(trace, *evaluator, ens));

  if (sc.evaluator == "simulated") {
    // Separate seeded replays per probe batch size, so the table measures the
    // estimator, not whatever mixture the main trace happened to be.
    json table = json::array();
    for (std::size_t i = 0; i < sc.quality_sample_counts.size(); ++i) {
      const Eigen::Index n = sc.quality_sample_counts[i];
      RandomProposer probe_proposer;
      SimulatedEvaluatorOptions eopts;
      eopts.sample_count = n;
      eopts.label_rate = sc.label_rate;
      SimulatedEvaluator probe_evaluator(eopts);
      SearchOptions qopts;
      qopts.budget = sc.quality_budget;
      qopts.bin_count = sc.bin_count;
      qopts.rng_seed = derive_seed(cfg.top.seed, 0x9c5eu, static_cast<std::uint64_t>(i));
      qopts.run_id = sc.run_id + "-quality";
      const auto qtrace =
          run_monotonic_search(sc.baseline, ens, probe_proposer, probe_evaluator, qopts);
      json row = cell_json(gate_quality(qtrace, probe_evaluator, ens));
      row["sample_count"] = static_cast<long long>(n);
      table.push_back(row);
    }
    results["quality_table"] = table;
  } else {
    results["quality_table"] = json(nullptr);
  }

  if (external != nullptr) {
    results["external"] = {{"calls", external->call_count()},
                           {"unreachable", external->unreachable_count()}};
    if (external->call_count() > 0 &&
        external->unreachable_count() == external->call_count())
      exit_code = 3;
  } else {
    results["external"] = json(nullptr);
  }
  return results;
}

ContinuousProblem make_constant_problem(const SurrogateConfig& sc, const EnsembleSpec& ens) {
  ContinuousProblem p;
  p.dimension = 1;
  p.bounds = {{0.0, 1.0}};
  const ArchitectureStatsd b = sc.baseline;
  const double e = ensemble_error_homogeneous(b, ens);
  p.ensemble_error = [e](const Eigen::VectorXd&) { return e; };
  p.correlation = [b](const Eigen::VectorXd&) { return b.correlation; };
  p.delta_error = [](const Eigen::VectorXd&) { return 0.0; };
  p.variance = [b](const Eigen::VectorXd&) { return b.variance; };
  p.baseline = b;
  return p;
}

ContinuousProblem make_table_problem(const SurrogateConfig& sc) {
  const SurrogateTable& t = sc.table;
  if (t.empty()) throw ConfigError("surrogate.table is required for the table-1d preset");
  auto interp = [x = t.x](std::vector<double> y) {
    return [x, y = std::move(y)](const Eigen::VectorXd& q) {
      const double v = q[0];
      if (v <= x.front()) return y.front();
      if (v >= x.back()) return y.back();
      const std::size_t hi = std::upper_bound(x.begin(), x.end(), v) - x.begin();
      const double w = (v - x[hi - 1]) / (x[hi] - x[hi - 1]);
      return y[hi - 1] + w * (y[hi] - y[hi - 1]);
    };
  };
  ContinuousProblem p;
  p.dimension = 1;
  p.bounds = {{t.x.front(), t.x.back()}};
  p.ensemble_error = interp(t.ensemble_error);
  p.correlation = interp(t.correlation);
  p.delta_error = interp(t.delta_error);
  p.variance = interp(t.variance);
  p.baseline = sc.baseline;
  return p;
}

json cmd_surrogate(const RunConfig& cfg) {
  const SurrogateConfig& sc = cfg.surrogate;
  const EnsembleSpec ens{sc.ensemble_size};

  ContinuousProblem problem;
  json closed_form = nullptr;
  double alpha_star = 0.0;
  if (sc.preset == "bagging-1d" || sc.preset == "infeasible-1d") {
    BaggingModeld model = cfg.bagging.model;
    BaggingProblemOptions bopts{sc.alpha_old, sc.lower, sc.upper};
    if (sc.preset == "infeasible-1d") {
      // Decorrelation so weak the feasible sliver is narrower than one ulp of
      // the correlation scale; the optimizer must come back infeasible.
      model = BaggingModeld{0.2, 50.0, -1e-8, 0.6, 0.05};
      bopts = BaggingProblemOptions{1.0, 0.5, 1.0};
    }
    try {
      problem = make_bagging_problem(model, ens, bopts);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("surrogate: ") + e.what());
    }
    if (is_admissible(model, ens)) {
      alpha_star = optimal_alpha(model, ens);
      closed_form = {{"alpha_star", alpha_star},
                     {"minimal_error", minimal_ensemble_error(model, ens).minimal_error}};
    }
  } else if (sc.preset == "constant") {
    problem = make_constant_problem(sc, ens);
  } else if (sc.preset == "table-1d") {
    problem = make_table_problem(sc);
  } else {
    throw ConfigError("unknown surrogate preset '" + sc.preset + "'");
  }

  const SurrogateResult r = surrogate_optimize(problem, ens, sc.options);
  if (!closed_form.is_null()) closed_form["abs_difference"] = std::abs(r.point[0] - alpha_star);

  json starts = json::array();
  int iterations_total = 0;
  for (const auto& s : r.history) {
    iterations_total += s.iterations;
    starts.push_back({{"start_index", s.start_index},
                      {"initial_point", vec_json(s.initial_point)},
                      {"point", vec_json(s.point)},
                      {"objective", s.objective},
                      {"constraint_margin", s.constraint_margin},
                      {"feasible", s.feasible},
                      {"iterations", s.iterations}});
  }

  json results;
  results["preset"] = sc.preset;
  results["dimension"] = problem.dimension;
  results["point"] = vec_json(r.point);
  results["alpha"] = problem.dimension == 1 ? json(r.point[0]) : json(nullptr);
  results["objective"] = r.objective;
  results["feasible"] = r.feasible;
  results["constraint_margin"] = r.constraint_margin;
  results["best_start"] = r.best_start;
  results["multistart"] = sc.options.multistart;
  results["iterations_total"] = iterations_total;
  results["starts"] = starts;
  results["closed_form"] = closed_form;
  return results;
}

json cmd_estimate_fidelity(const RunConfig& cfg) {
  if (cfg.sim.ensemble_size < 2)
    throw ConfigError("estimate-fidelity requires sim.ensemble_size >= 2");
  const auto report = estimation_fidelity_report(cfg.sim, cfg.fidelity.sample_grid,
                                                 cfg.fidelity.replications, cfg.fidelity.jitter);
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"sample_count", static_cast<long long>(r.sample_count)},
                    {"small_sample_regime", r.small_sample_regime},
                    {"bias_error", r.bias_error},
                    {"rmse_error", r.rmse_error},
                    {"bias_variance", r.bias_variance},
                    {"rmse_variance", r.rmse_variance},
                    {"bias_correlation", r.bias_correlation},
                    {"rmse_correlation", r.rmse_correlation},
                    {"error_tracking_correlation", r.error_tracking_correlation},
                    {"mean_prediction_correlation", r.mean_prediction_correlation},
                    {"mean_deviation_correlation", r.mean_deviation_correlation}});
  return {{"replications", report.replications},
          {"ensemble_size", report.ensemble_size},
          {"jitter",
           {{"variance_rel", report.jitter.variance_rel},
            {"bias_rel", report.jitter.bias_rel},
            {"correlation_abs", report.jitter.correlation_abs}}},
          {"rows", rows}};
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"verify-theory", "optimize-alpha", "cost",
                                              "search",        "surrogate",      "estimate-fidelity"};
  return names;
}

CommandOutcome run_command(const std::string& command, const json& config_doc) {
  RunConfig cfg = parse_config(config_doc);
  apply_trials(cfg, command);

  CommandOutcome out;
  out.envelope.command = command;
  out.envelope.config = echo_config(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  if (command == "verify-theory") {
    out.envelope.results = cmd_verify_theory(cfg, out.exit_code);
  } else if (command == "optimize-alpha") {
    out.envelope.results = cmd_optimize_alpha(cfg);
  } else if (command == "cost") {
    out.envelope.results = cmd_cost(cfg);
  } else if (command == "search") {
    out.envelope.results = cmd_search(cfg, out.exit_code);
  } else if (command == "surrogate") {
    out.envelope.results = cmd_surrogate(cfg);
  } else if (command == "estimate-fidelity") {
    out.envelope.results = cmd_estimate_fidelity(cfg);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  out.envelope.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace ens::cli
