#include "ens/cli/config.hpp"

#include <cstddef>
#include <initializer_list>
#include <utility>

namespace ens::cli {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) fail("unknown key '" + item.key() + "' in " + where);
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + " must be a number");
  return v.get<double>();
}

long long as_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + " must be an integer");
  return v.get<long long>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where + " must be a string");
  return v.get<std::string>();
}

void read_double(const json& obj, const char* key, const std::string& where, double& out) {
  if (const json* v = find(obj, key)) out = as_double(*v, where + "." + key);
}

void read_int(const json& obj, const char* key, const std::string& where, int& out) {
  if (const json* v = find(obj, key))
    out = static_cast<int>(as_integer(*v, where + "." + key));
}

void read_index(const json& obj, const char* key, const std::string& where,
                Eigen::Index& out) {
  if (const json* v = find(obj, key))
    out = static_cast<Eigen::Index>(as_integer(*v, where + "." + key));
}

void read_string(const json& obj, const char* key, const std::string& where,
                 std::string& out) {
  if (const json* v = find(obj, key)) out = as_string(*v, where + "." + key);
}

std::vector<double> as_double_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_double(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Eigen::Index> as_index_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array of integers");
  std::vector<Eigen::Index> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(static_cast<Eigen::Index>(
        as_integer(v[i], where + "[" + std::to_string(i) + "]")));
  return out;
}

ArchitectureStatsd parse_stats(const json& obj, const std::string& where,
                               ArchitectureStatsd out) {
  if (!obj.is_object()) fail(where + " must be an object");
  reject_unknown(obj, where, {"error", "variance", "correlation"});
  read_double(obj, "error", where, out.expected_error);
  read_double(obj, "variance", where, out.variance);
  read_double(obj, "correlation", where, out.correlation);
  try {
    validate(out);
  } catch (const std::exception& e) {
    fail(where + ": " + e.what());
  }
  return out;
}

void parse_sim(const json& obj, SimConfigd& sim) {
  const std::string where = "sim";
  reject_unknown(obj, where,
                 {"ensemble_size", "sample_count", "target_error", "target_variance",
                  "target_correlation", "label_model", "label_rate", "label_rate_halfwidth"});
  read_int(obj, "ensemble_size", where, sim.ensemble_size);
  read_index(obj, "sample_count", where, sim.sample_count);
  read_double(obj, "target_error", where, sim.target_error);
  read_double(obj, "target_variance", where, sim.target_variance);
  read_double(obj, "target_correlation", where, sim.target_correlation);
  if (const json* v = find(obj, "label_model")) {
    const std::string name = as_string(*v, "sim.label_model");
    if (name == "constant_p") {
      sim.label_model = LabelModel::kConstantP;
    } else if (name == "per_sample_p") {
      sim.label_model = LabelModel::kPerSampleP;
    } else {
      fail("sim.label_model must be 'constant_p' or 'per_sample_p'");
    }
  }
  read_double(obj, "label_rate", where, sim.label_rate);
  read_double(obj, "label_rate_halfwidth", where, sim.label_rate_halfwidth);
}

void parse_verify(const json& obj, VerifyConfig& v) {
  const std::string where = "verify";
  reject_unknown(obj, where, {"trials", "gate_pairs", "gate_sample_count", "agreement_floor"});
  read_int(obj, "trials", where, v.trials);
  read_int(obj, "gate_pairs", where, v.gate_pairs);
  read_index(obj, "gate_sample_count", where, v.gate_sample_count);
  read_double(obj, "agreement_floor", where, v.agreement_floor);
  if (v.trials < 1) fail("verify.trials must be >= 1");
  if (v.gate_pairs < 1) fail("verify.gate_pairs must be >= 1");
  if (v.gate_sample_count < 2) fail("verify.gate_sample_count must be >= 2");
  if (!(v.agreement_floor >= 0 && v.agreement_floor <= 1))
    fail("verify.agreement_floor must be in [0, 1]");
}

void parse_bagging(const json& obj, BaggingConfig& b) {
  const std::string where = "bagging";
  reject_unknown(obj, where,
                 {"base_error", "error_curvature", "decorrelation_slope", "base_correlation",
                  "base_variance", "ensemble_size", "alpha_old", "sweep_points"});
  read_double(obj, "base_error", where, b.model.base_error);
  read_double(obj, "error_curvature", where, b.model.error_curvature);
  read_double(obj, "decorrelation_slope", where, b.model.decorrelation_slope);
  read_double(obj, "base_correlation", where, b.model.base_correlation);
  read_double(obj, "base_variance", where, b.model.base_variance);
  read_int(obj, "ensemble_size", where, b.ensemble_size);
  read_double(obj, "alpha_old", where, b.alpha_old);
  read_int(obj, "sweep_points", where, b.sweep_points);
  try {
    validate(b.model);
  } catch (const std::exception& e) {
    fail(where + ": " + std::string(e.what()));
  }
  if (b.ensemble_size < 1) fail("bagging.ensemble_size must be >= 1");
  if (!(b.alpha_old > 0 && b.alpha_old <= 1)) fail("bagging.alpha_old must be in (0, 1]");
  if (b.sweep_points < 2) fail("bagging.sweep_points must be >= 2");
}

void parse_cost(const json& obj, CostConfig& c) {
  const std::string where = "cost";
  reject_unknown(obj, where, {"n_trials", "ensemble_size", "learner_cost", "estimation_cost"});
  if (const json* v = find(obj, "n_trials")) c.model.n_trials = as_integer(*v, "cost.n_trials");
  read_int(obj, "ensemble_size", where, c.model.ensemble_size);
  read_double(obj, "learner_cost", where, c.model.learner_cost);
  read_double(obj, "estimation_cost", where, c.model.estimation_cost);
  try {
    validate(c.model);
  } catch (const std::exception& e) {
    fail(where + ": " + std::string(e.what()));
  }
}

void parse_search(const json& obj, SearchConfig& s) {
  const std::string where = "search";
  reject_unknown(obj, where,
                 {"baseline", "ensemble_size", "budget", "bin_count", "run_id", "proposer",
                  "proposer_url", "timeout_seconds", "evaluator", "sample_count", "label_rate",
                  "scripted", "quality_sample_counts", "quality_budget"});
  if (const json* v = find(obj, "baseline"))
    s.baseline = parse_stats(*v, "search.baseline", s.baseline);
  read_int(obj, "ensemble_size", where, s.ensemble_size);
  read_int(obj, "budget", where, s.budget);
  read_int(obj, "bin_count", where, s.bin_count);
  read_string(obj, "run_id", where, s.run_id);
  read_string(obj, "proposer", where, s.proposer);
  read_string(obj, "proposer_url", where, s.proposer_url);
  read_double(obj, "timeout_seconds", where, s.timeout_seconds);
  read_string(obj, "evaluator", where, s.evaluator);
  read_index(obj, "sample_count", where, s.sample_count);
  read_double(obj, "label_rate", where, s.label_rate);
  if (const json* v = find(obj, "scripted")) {
    if (!v->is_array()) fail("search.scripted must be an array");
    s.scripted.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& entry = (*v)[i];
      const std::string at = "search.scripted[" + std::to_string(i) + "]";
      if (!entry.is_object()) fail(at + " must be an object");
      reject_unknown(entry, at, {"id", "payload"});
      CandidateDescriptor d;
      read_string(entry, "id", at, d.id);
      const json* payload = find(entry, "payload");
      if (payload == nullptr || !payload->is_object()) fail(at + ".payload must be an object");
      for (const auto& item : payload->items())
        d.payload[item.key()] = as_double(item.value(), at + ".payload." + item.key());
      s.scripted.push_back(std::move(d));
    }
  }
  if (const json* v = find(obj, "quality_sample_counts"))
    s.quality_sample_counts = as_index_array(*v, "search.quality_sample_counts");
  read_int(obj, "quality_budget", where, s.quality_budget);

  if (s.ensemble_size < 2) fail("search.ensemble_size must be >= 2");
  if (!(s.baseline.variance > 0)) fail("search.baseline.variance must be > 0");
  if (s.budget < 1) fail("search.budget must be >= 1");
  if (s.bin_count < 1) fail("search.bin_count must be >= 1");
  if (s.proposer != "random" && s.proposer != "scripted" && s.proposer != "external")
    fail("search.proposer must be one of: random, scripted, external");
  if (s.evaluator != "simulated" && s.evaluator != "exact")
    fail("search.evaluator must be 'simulated' or 'exact'");
  if (s.proposer == "external" && s.proposer_url.empty())
    fail("search.proposer_url is required for the external proposer");
  if (!(s.timeout_seconds > 0)) fail("search.timeout_seconds must be > 0");
  if (s.sample_count < 2) fail("search.sample_count must be >= 2");
  if (!(s.label_rate > 0 && s.label_rate < 1)) fail("search.label_rate must be in (0, 1)");
  if (s.quality_sample_counts.empty())
    fail("search.quality_sample_counts must not be empty");
  for (const Eigen::Index n : s.quality_sample_counts)
    if (n < 2) fail("search.quality_sample_counts entries must be >= 2");
  if (s.quality_budget < 1) fail("search.quality_budget must be >= 1");
}

void parse_surrogate(const json& obj, SurrogateConfig& s) {
  const std::string where = "surrogate";
  reject_unknown(obj, where,
                 {"preset", "multistart", "max_iterations", "penalty_stages", "initial_penalty",
                  "penalty_growth", "fd_step_rel", "constraint_tolerance", "alpha_old", "lower",
                  "upper", "ensemble_size", "baseline", "table"});
  read_string(obj, "preset", where, s.preset);
  read_int(obj, "multistart", where, s.options.multistart);
  read_int(obj, "max_iterations", where, s.options.max_iterations);
  read_int(obj, "penalty_stages", where, s.options.penalty_stages);
  read_double(obj, "initial_penalty", where, s.options.initial_penalty);
  read_double(obj, "penalty_growth", where, s.options.penalty_growth);
  read_double(obj, "fd_step_rel", where, s.options.fd_step_rel);
  read_double(obj, "constraint_tolerance", where, s.options.constraint_tolerance);
  read_double(obj, "alpha_old", where, s.alpha_old);
  read_double(obj, "lower", where, s.lower);
  read_double(obj, "upper", where, s.upper);
  read_int(obj, "ensemble_size", where, s.ensemble_size);
  if (const json* v = find(obj, "baseline"))
    s.baseline = parse_stats(*v, "surrogate.baseline", s.baseline);
  if (const json* v = find(obj, "table")) {
    if (!v->is_object()) fail("surrogate.table must be an object");
    reject_unknown(*v, "surrogate.table",
                   {"x", "ensemble_error", "correlation", "delta_error", "variance"});
    auto column = [&](const char* key) {
      const json* a = find(*v, key);
      if (a == nullptr) fail(std::string("surrogate.table.") + key + " is required");
      return as_double_array(*a, std::string("surrogate.table.") + key);
    };
    s.table.x = column("x");
    s.table.ensemble_error = column("ensemble_error");
    s.table.correlation = column("correlation");
    s.table.delta_error = column("delta_error");
    s.table.variance = column("variance");
    const std::size_t n = s.table.x.size();
    if (n < 2) fail("surrogate.table needs at least 2 grid points");
    if (s.table.ensemble_error.size() != n || s.table.correlation.size() != n ||
        s.table.delta_error.size() != n || s.table.variance.size() != n)
      fail("surrogate.table columns must all have the same length");
    for (std::size_t i = 1; i < n; ++i)
      if (!(s.table.x[i] > s.table.x[i - 1]))
        fail("surrogate.table.x must be strictly increasing");
  }

  if (s.options.multistart < 1) fail("surrogate.multistart must be >= 1");
  if (s.options.max_iterations < 1) fail("surrogate.max_iterations must be >= 1");
  if (s.options.penalty_stages < 1) fail("surrogate.penalty_stages must be >= 1");
  if (!(s.options.initial_penalty > 0)) fail("surrogate.initial_penalty must be > 0");
  if (!(s.options.penalty_growth >= 1)) fail("surrogate.penalty_growth must be >= 1");
  if (!(s.options.fd_step_rel > 0)) fail("surrogate.fd_step_rel must be > 0");
  if (!(s.options.constraint_tolerance >= 0))
    fail("surrogate.constraint_tolerance must be >= 0");
  if (s.ensemble_size < 2) fail("surrogate.ensemble_size must be >= 2");
}

void parse_fidelity(const json& obj, FidelityConfig& f) {
  const std::string where = "fidelity";
  reject_unknown(obj, where, {"sample_grid", "replications", "jitter"});
  if (const json* v = find(obj, "sample_grid"))
    f.sample_grid = as_index_array(*v, "fidelity.sample_grid");
  read_int(obj, "replications", where, f.replications);
  if (const json* v = find(obj, "jitter")) {
    if (!v->is_object()) fail("fidelity.jitter must be an object");
    reject_unknown(*v, "fidelity.jitter", {"variance_rel", "bias_rel", "correlation_abs"});
    read_double(*v, "variance_rel", "fidelity.jitter", f.jitter.variance_rel);
    read_double(*v, "bias_rel", "fidelity.jitter", f.jitter.bias_rel);
    read_double(*v, "correlation_abs", "fidelity.jitter", f.jitter.correlation_abs);
  }
  if (f.replications < 2) fail("fidelity.replications must be >= 2");
  if (f.sample_grid.empty()) fail("fidelity.sample_grid must not be empty");
  for (const Eigen::Index n : f.sample_grid)
    if (n < 2) fail("fidelity.sample_grid entries must be >= 2");
  if (!(f.jitter.variance_rel >= 0 && f.jitter.variance_rel < 1))
    fail("fidelity.jitter.variance_rel must be in [0, 1)");
  if (!(f.jitter.bias_rel >= 0 && f.jitter.bias_rel < 1))
    fail("fidelity.jitter.bias_rel must be in [0, 1)");
  if (!(f.jitter.correlation_abs >= 0)) fail("fidelity.jitter.correlation_abs must be >= 0");
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("config root must be a JSON object");
  reject_unknown(doc, "config",
                 {"seed", "format", "out", "trials", "sim", "verify", "bagging", "cost",
                  "search", "surrogate", "fidelity"});

  RunConfig cfg;
  if (const json* v = find(doc, "seed")) {
    if (v->is_number_unsigned()) {
      cfg.top.seed = v->get<std::uint64_t>();
    } else if (v->is_number_integer() && v->get<long long>() >= 0) {
      cfg.top.seed = static_cast<std::uint64_t>(v->get<long long>());
    } else {
      fail("seed must be a nonnegative integer");
    }
  }
  read_string(doc, "format", "config", cfg.top.format);
  if (cfg.top.format != "json" && cfg.top.format != "csv")
    fail("format must be 'json' or 'csv'");
  if (const json* v = find(doc, "out")) cfg.top.out = as_string(*v, "out");
  if (const json* v = find(doc, "trials")) {
    const long long t = as_integer(*v, "trials");
    if (t < 1) fail("trials must be >= 1");
    cfg.top.trials = t;
  }

  // CLI-facing simulator defaults; the struct's own defaults describe the
  // smallest valid generator, not a useful demo.
  cfg.sim.ensemble_size = 10;
  cfg.sim.sample_count = 10000;
  cfg.sim.target_error = 0.25;
  cfg.sim.target_variance = 0.05;
  cfg.sim.target_correlation = 0.2;
  cfg.sim.label_rate = 0.2;
  if (const json* v = find(doc, "sim")) {
    if (!v->is_object()) fail("sim must be an object");
    parse_sim(*v, cfg.sim);
  }
  cfg.sim.rng_seed = cfg.top.seed;
  try {
    validate(cfg.sim);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(std::string("sim: ") + e.what());
  }

  if (const json* v = find(doc, "verify")) {
    if (!v->is_object()) fail("verify must be an object");
    parse_verify(*v, cfg.verify);
  }
  if (const json* v = find(doc, "bagging")) {
    if (!v->is_object()) fail("bagging must be an object");
    parse_bagging(*v, cfg.bagging);
  }
  if (const json* v = find(doc, "cost")) {
    if (!v->is_object()) fail("cost must be an object");
    parse_cost(*v, cfg.cost);
  }
  if (const json* v = find(doc, "search")) {
    if (!v->is_object()) fail("search must be an object");
    parse_search(*v, cfg.search);
  }
  if (const json* v = find(doc, "surrogate")) {
    if (!v->is_object()) fail("surrogate must be an object");
    parse_surrogate(*v, cfg.surrogate);
  }
  if (const json* v = find(doc, "fidelity")) {
    if (!v->is_object()) fail("fidelity must be an object");
    parse_fidelity(*v, cfg.fidelity);
  }
  cfg.surrogate.options.rng_seed = cfg.top.seed;
  return cfg;
}

void apply_trials(RunConfig& cfg, const std::string& command) {
  if (!cfg.top.trials) return;
  const long long t = *cfg.top.trials;
  if (command == "verify-theory") {
    cfg.verify.trials = static_cast<int>(t);
  } else if (command == "search") {
    cfg.search.budget = static_cast<int>(t);
  } else if (command == "surrogate") {
    cfg.surrogate.options.multistart = static_cast<int>(t);
  } else if (command == "estimate-fidelity") {
    if (t < 2) fail("trials must be >= 2 for estimate-fidelity");
    cfg.fidelity.replications = static_cast<int>(t);
  }
  cfg.top.trials.reset();
}

nlohmann::json to_json(const ArchitectureStatsd& s) {
  return {{"error", s.expected_error},
          {"variance", s.variance},
          {"correlation", s.correlation}};
}

nlohmann::json echo_config(const RunConfig& cfg) {
  json doc;
  doc["seed"] = cfg.top.seed;
  doc["format"] = cfg.top.format;
  if (cfg.top.out) doc["out"] = *cfg.top.out;

  json sim;
  sim["ensemble_size"] = cfg.sim.ensemble_size;
  sim["sample_count"] = static_cast<long long>(cfg.sim.sample_count);
  sim["target_error"] = cfg.sim.target_error;
  sim["target_variance"] = cfg.sim.target_variance;
  sim["target_correlation"] = cfg.sim.target_correlation;
  sim["label_model"] = to_string(cfg.sim.label_model);
  sim["label_rate"] = cfg.sim.label_rate;
  sim["label_rate_halfwidth"] = cfg.sim.label_rate_halfwidth;
  doc["sim"] = sim;

  json verify;
  verify["trials"] = cfg.verify.trials;
  verify["gate_pairs"] = cfg.verify.gate_pairs;
  verify["gate_sample_count"] = static_cast<long long>(cfg.verify.gate_sample_count);
  verify["agreement_floor"] = cfg.verify.agreement_floor;
  doc["verify"] = verify;

  json bagging;
  bagging["base_error"] = cfg.bagging.model.base_error;
  bagging["error_curvature"] = cfg.bagging.model.error_curvature;
  bagging["decorrelation_slope"] = cfg.bagging.model.decorrelation_slope;
  bagging["base_correlation"] = cfg.bagging.model.base_correlation;
  bagging["base_variance"] = cfg.bagging.model.base_variance;
  bagging["ensemble_size"] = cfg.bagging.ensemble_size;
  bagging["alpha_old"] = cfg.bagging.alpha_old;
  bagging["sweep_points"] = cfg.bagging.sweep_points;
  doc["bagging"] = bagging;

  json cost;
  cost["n_trials"] = cfg.cost.model.n_trials;
  cost["ensemble_size"] = cfg.cost.model.ensemble_size;
  cost["learner_cost"] = cfg.cost.model.learner_cost;
  cost["estimation_cost"] = cfg.cost.model.estimation_cost;
  doc["cost"] = cost;

  json search;
  search["baseline"] = to_json(cfg.search.baseline);
  search["ensemble_size"] = cfg.search.ensemble_size;
  search["budget"] = cfg.search.budget;
  search["bin_count"] = cfg.search.bin_count;
  search["run_id"] = cfg.search.run_id;
  search["proposer"] = cfg.search.proposer;
  search["proposer_url"] = cfg.search.proposer_url;
  search["timeout_seconds"] = cfg.search.timeout_seconds;
  search["evaluator"] = cfg.search.evaluator;
  search["sample_count"] = static_cast<long long>(cfg.search.sample_count);
  search["label_rate"] = cfg.search.label_rate;
  json scripted = json::array();
  for (const auto& d : cfg.search.scripted) {
    json entry;
    entry["id"] = d.id;
    json payload = json::object();
    for (const auto& [key, value] : d.payload) payload[key] = value;
    entry["payload"] = payload;
    scripted.push_back(entry);
  }
  search["scripted"] = scripted;
  json counts = json::array();
  for (const Eigen::Index n : cfg.search.quality_sample_counts)
    counts.push_back(static_cast<long long>(n));
  search["quality_sample_counts"] = counts;
  search["quality_budget"] = cfg.search.quality_budget;
  doc["search"] = search;

  json surrogate;
  surrogate["preset"] = cfg.surrogate.preset;
  surrogate["multistart"] = cfg.surrogate.options.multistart;
  surrogate["max_iterations"] = cfg.surrogate.options.max_iterations;
  surrogate["penalty_stages"] = cfg.surrogate.options.penalty_stages;
  surrogate["initial_penalty"] = cfg.surrogate.options.initial_penalty;
  surrogate["penalty_growth"] = cfg.surrogate.options.penalty_growth;
  surrogate["fd_step_rel"] = cfg.surrogate.options.fd_step_rel;
  surrogate["constraint_tolerance"] = cfg.surrogate.options.constraint_tolerance;
  surrogate["alpha_old"] = cfg.surrogate.alpha_old;
  surrogate["lower"] = cfg.surrogate.lower;
  surrogate["upper"] = cfg.surrogate.upper;
  surrogate["ensemble_size"] = cfg.surrogate.ensemble_size;
  surrogate["baseline"] = to_json(cfg.surrogate.baseline);
  if (!cfg.surrogate.table.empty()) {
    json table;
    table["x"] = cfg.surrogate.table.x;
    table["ensemble_error"] = cfg.surrogate.table.ensemble_error;
    table["correlation"] = cfg.surrogate.table.correlation;
    table["delta_error"] = cfg.surrogate.table.delta_error;
    table["variance"] = cfg.surrogate.table.variance;
    surrogate["table"] = table;
  }
  doc["surrogate"] = surrogate;

  json fidelity;
  json grid = json::array();
  for (const Eigen::Index n : cfg.fidelity.sample_grid)
    grid.push_back(static_cast<long long>(n));
  fidelity["sample_grid"] = grid;
  fidelity["replications"] = cfg.fidelity.replications;
  json jitter;
  jitter["variance_rel"] = cfg.fidelity.jitter.variance_rel;
  jitter["bias_rel"] = cfg.fidelity.jitter.bias_rel;
  jitter["correlation_abs"] = cfg.fidelity.jitter.correlation_abs;
  fidelity["jitter"] = jitter;
  doc["fidelity"] = fidelity;

  return doc;
}

}  // namespace ens::cli
