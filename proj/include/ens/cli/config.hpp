#pragma once

#include "ens/bagging.hpp"
#include "ens/estimator.hpp"
#include "ens/search.hpp"
#include "ens/simulator.hpp"
#include "ens/stats.hpp"
#include "ens/surrogate.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ens::cli {

/// Anything wrong with the run configuration: unknown key, bad type, value a
/// module validator rejects. Maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TopConfig {
  std::uint64_t seed = 42;
  std::string format = "json";  // or "csv"
  std::optional<std::string> out;
  std::optional<long long> trials;  // generic budget knob, meaning depends on command
};

struct VerifyConfig {
  int trials = 10;             // formula-suite replications
  int gate_pairs = 200;        // baseline/candidate pairs in the gate experiment
  Eigen::Index gate_sample_count = 10000;
  double agreement_floor = 0.8;
};

struct BaggingConfig {
  BaggingModeld model{0.2, 0.1, -0.2, 0.6, 0.05};
  int ensemble_size = 10;
  double alpha_old = 1.0;
  int sweep_points = 1001;
};

struct CostConfig {
  CostModeld model{1000, 100, 1.0, 0.0};
};

struct SearchConfig {
  ArchitectureStatsd baseline{0.25, 0.05, 0.5};
  int ensemble_size = 10;
  int budget = 50;
  int bin_count = 3;
  std::string run_id = "run";
  std::string proposer = "random";  // random | scripted | external
  std::string proposer_url;
  double timeout_seconds = 5.0;
  std::string evaluator = "simulated";  // simulated | exact
  Eigen::Index sample_count = 10000;
  double label_rate = 0.2;
  std::vector<CandidateDescriptor> scripted;
  std::vector<Eigen::Index> quality_sample_counts{1000, 10000, 100000};
  int quality_budget = 400;
};

struct SurrogateTable {
  std::vector<double> x;
  std::vector<double> ensemble_error;
  std::vector<double> correlation;
  std::vector<double> delta_error;
  std::vector<double> variance;

  bool empty() const { return x.empty(); }
};

struct SurrogateConfig {
  std::string preset = "bagging-1d";  // bagging-1d | infeasible-1d | constant | table-1d
  SurrogateOptions options;
  double alpha_old = 1.0;
  double lower = 0.01;
  double upper = 1.0;
  int ensemble_size = 10;
  ArchitectureStatsd baseline{0.25, 0.05, 0.5};
  SurrogateTable table;
};

struct FidelityConfig {
  std::vector<Eigen::Index> sample_grid{1000, 10000, 100000};
  int replications = 50;
  FidelityJitter<double> jitter;
};

/// Full parsed run configuration; every block carries defaults, so {} is a
/// valid document. Unknown keys anywhere are rejected.
struct RunConfig {
  TopConfig top;
  SimConfigd sim;
  VerifyConfig verify;
  BaggingConfig bagging;
  CostConfig cost;
  SearchConfig search;
  SurrogateConfig surrogate;
  FidelityConfig fidelity;
};

RunConfig parse_config(const nlohmann::json& doc);

/// Routes the generic top-level trials override into the block field the
/// command actually reads: verify-theory replications, search budget,
/// surrogate multistarts, fidelity replications. No-op for other commands.
void apply_trials(RunConfig& cfg, const std::string& command);

/// Serializes the effective configuration back to a document that, parsed
/// again, reproduces the run bit-exactly. The generic trials knob is omitted;
/// apply_trials has already materialized it into its block.
nlohmann::json echo_config(const RunConfig& cfg);

nlohmann::json to_json(const ArchitectureStatsd& s);

}  // namespace ens::cli
