#include "ens/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

const char* describe(const std::string& command) {
  if (command == "verify-theory")
    return "Monte-Carlo validation of the closed-form error laws and the acceptance gate";
  if (command == "optimize-alpha")
    return "Closed-form optimal feature keep-rate with a dense sweep cross-check";
  if (command == "cost") return "Search cost comparison: full-ensemble vs decoupled validation";
  if (command == "search") return "Monotonic architecture search with a transitivity audit";
  if (command == "surrogate") return "Constrained continuous optimization on surrogate curves";
  return "Dual-training estimator fidelity across probe batch sizes";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble-decoupled architecture search toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::optional<std::string> out_path;
  std::optional<long long> trials;
  std::optional<std::string> proposer;
  std::optional<std::string> proposer_url;

  for (const std::string& name : ens::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", config_path, "JSON configuration file")
        ->envname("ENSEARCH_CONFIG");
    sub->add_option("--seed", seed, "master RNG seed (default 42)")->envname("ENSEARCH_SEED");
    sub->add_option("--format", format, "report format: json or csv")
        ->envname("ENSEARCH_FORMAT");
    sub->add_option("--out", out_path, "write the report here instead of stdout")
        ->envname("ENSEARCH_OUT");
    sub->add_option("--trials", trials,
                    "generic budget override: verify-theory replications, search budget, "
                    "surrogate multistarts, estimate-fidelity replications")
        ->envname("ENSEARCH_TRIALS");
    if (name == "search") {
      sub->add_option("--proposer", proposer, "candidate source: scripted, random, external")
          ->envname("ENSEARCH_PROPOSER");
      sub->add_option("--proposer-url", proposer_url, "endpoint for the external proposer")
          ->envname("ENSEARCH_PROPOSER_URL");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();

  nlohmann::json doc = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "ensearch: cannot open config file '" << config_path << "'\n";
      return 2;
    }
    try {
      in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "ensearch: config parse error: " << e.what() << '\n';
      return 2;
    }
  }
  if (!doc.is_object()) {
    std::cerr << "ensearch: config root must be a JSON object\n";
    return 2;
  }
  if (seed) doc["seed"] = *seed;
  if (format) doc["format"] = *format;
  if (out_path) doc["out"] = *out_path;
  if (trials) doc["trials"] = *trials;
  if (proposer || proposer_url) {
    if (!doc.contains("search") || !doc["search"].is_object())
      doc["search"] = nlohmann::json::object();
    if (proposer) doc["search"]["proposer"] = *proposer;
    if (proposer_url) doc["search"]["proposer_url"] = *proposer_url;
  }

  try {
    const ens::cli::CommandOutcome outcome = ens::cli::run_command(command, doc);
    const nlohmann::json report = ens::cli::to_json(outcome.envelope);

    const auto& config = outcome.envelope.config;
    const bool csv = config.contains("format") && config["format"] == "csv";
    const std::string payload = csv ? ens::cli::to_csv(report) : report.dump(2) + "\n";

    if (config.contains("out")) {
      const std::string dest = config["out"].get<std::string>();
      std::ofstream file(dest);
      if (!file) {
        std::cerr << "ensearch: cannot write report to '" << dest << "'\n";
        return 2;
      }
      file << payload;
    } else {
      std::cout << payload;
    }
    return outcome.exit_code;
  } catch (const ens::cli::ConfigError& e) {
    std::cerr << "ensearch: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ensearch: " << e.what() << '\n';
    return 2;
  }
}
