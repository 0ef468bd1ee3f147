#include <doctest.h>

#include "ens/cli/commands.hpp"
#include "ens/cli/json_schema.hpp"
#include "ens/cli/report.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

using nlohmann::json;
namespace cli = ens::cli;

namespace {

json load_schema(const char* name) {
  const std::string path = std::string(ENSEARCH_SCHEMA_DIR) + "/" + name;
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing schema file ", path);
  json schema;
  in >> schema;
  return schema;
}

const json& report_schema() {
  static const json schema = load_schema("report.schema.json");
  return schema;
}

const json& wire_schema() {
  static const json schema = load_schema("proposer_wire.schema.json");
  return schema;
}

void expect_valid(const json& schema, const json& instance) {
  const auto errors = cli::schema_errors(schema, instance);
  for (const auto& e : errors) INFO("schema violation: ", e);
  CHECK(errors.empty());
}

json run_results(const std::string& command, const json& config) {
  return cli::run_command(command, config).envelope.results;
}

json run_report(const std::string& command, const json& config) {
  return cli::to_json(cli::run_command(command, config).envelope);
}

}  // namespace

TEST_CASE("schema validator: scalar type checks") {
  const json schema = {{"type", "integer"}};
  CHECK(cli::matches_schema(schema, json(3)));
  CHECK_FALSE(cli::matches_schema(schema, json(1.5)));
  CHECK_FALSE(cli::matches_schema(schema, json("3")));
  CHECK(cli::matches_schema({{"type", "number"}}, json(3)));       // integers are numbers
  CHECK(cli::matches_schema({{"type", "number"}}, json(1.5)));
  CHECK(cli::matches_schema({{"type", "boolean"}}, json(true)));
  CHECK_FALSE(cli::matches_schema({{"type", "boolean"}}, json(0)));
  CHECK(cli::matches_schema({{"type", "null"}}, json(nullptr)));
}

TEST_CASE("schema validator: type unions") {
  const json schema = {{"type", json::array({"number", "null"})}};
  CHECK(cli::matches_schema(schema, json(1.5)));
  CHECK(cli::matches_schema(schema, json(nullptr)));
  CHECK_FALSE(cli::matches_schema(schema, json("x")));
}

TEST_CASE("schema validator: required and additionalProperties") {
  const json schema = {{"type", "object"},
                       {"required", json::array({"a", "b"})},
                       {"additionalProperties", false},
                       {"properties", {{"a", {{"type", "integer"}}}, {"b", {{"type", "string"}}}}}};
  CHECK(cli::matches_schema(schema, json{{"a", 1}, {"b", "x"}}));
  const auto missing = cli::schema_errors(schema, json{{"a", 1}});
  REQUIRE(missing.size() == 1u);
  CHECK(missing[0].find("missing required property 'b'") != std::string::npos);
  const auto extra = cli::schema_errors(schema, json{{"a", 1}, {"b", "x"}, {"c", 2}});
  REQUIRE(extra.size() == 1u);
  CHECK(extra[0].find("unexpected property 'c'") != std::string::npos);
}

TEST_CASE("schema validator: schema-valued additionalProperties") {
  const json schema = {{"type", "object"}, {"additionalProperties", {{"type", "number"}}}};
  CHECK(cli::matches_schema(schema, json{{"x", 1.0}, {"y", 2}}));
  const auto errors = cli::schema_errors(schema, json{{"x", "no"}});
  REQUIRE(errors.size() == 1u);
  CHECK(errors[0].find("#/x") != std::string::npos);
}

TEST_CASE("schema validator: enum, bounds, items") {
  CHECK(cli::matches_schema({{"enum", json::array({"a", "b"})}}, json("a")));
  CHECK_FALSE(cli::matches_schema({{"enum", json::array({"a", "b"})}}, json("c")));
  CHECK(cli::matches_schema({{"enum", json::array({1})}}, json(1)));

  const json bounded = {{"type", "number"}, {"minimum", 0}, {"maximum", 1}};
  CHECK(cli::matches_schema(bounded, json(0.5)));
  CHECK_FALSE(cli::matches_schema(bounded, json(-0.1)));
  CHECK_FALSE(cli::matches_schema(bounded, json(1.1)));

  const json array_schema = {{"type", "array"}, {"items", {{"type", "integer"}}}};
  CHECK(cli::matches_schema(array_schema, json::array({1, 2, 3})));
  const auto errors = cli::schema_errors(array_schema, json::array({1, "x", 3}));
  REQUIRE(errors.size() == 1u);
  CHECK(errors[0].find("#/1") != std::string::npos);
}

TEST_CASE("schema validator: oneOf demands exactly one match") {
  const json schema = {{"oneOf", json::array({json{{"type", "integer"}},
                                              json{{"type", "number"}},
                                              json{{"type", "string"}}})}};
  // 1.5 matches only "number"; 3 matches both numeric branches.
  CHECK(cli::matches_schema(schema, json(1.5)));
  CHECK(cli::matches_schema(schema, json("x")));
  const auto errors = cli::schema_errors(schema, json(3));
  REQUIRE(errors.size() == 1u);
  CHECK(errors[0].find("matched 2 oneOf branches") != std::string::npos);
  CHECK_FALSE(cli::matches_schema(schema, json(true)));
}

TEST_CASE("schema validator: local ref resolution") {
  const json root = {{"definitions", {{"pos", {{"type", "number"}, {"minimum", 0}}}}},
                     {"properties", {{"x", {{"$ref", "#/definitions/pos"}}}}},
                     {"type", "object"}};
  CHECK(cli::matches_schema(root, json{{"x", 2.0}}));
  CHECK_FALSE(cli::matches_schema(root, json{{"x", -2.0}}));
  CHECK(cli::schema_errors_at(root, "#/definitions/pos", json(1.0)).empty());
  CHECK_FALSE(cli::schema_errors_at(root, "#/definitions/pos", json(-1.0)).empty());
}

TEST_CASE("report schema accepts every command's envelope") {
  expect_valid(report_schema(), run_report("cost", json::object()));
  expect_valid(report_schema(), run_report("optimize-alpha", json::object()));

  const json verify_cfg = {{"sim", {{"sample_count", 2000}}},
                           {"verify", {{"trials", 3}, {"gate_pairs", 20}, {"gate_sample_count", 500}}}};
  expect_valid(report_schema(), run_report("verify-theory", verify_cfg));

  const json search_cfg = {{"search",
                            {{"budget", 10},
                             {"sample_count", 500},
                             {"quality_sample_counts", json::array({200, 400})},
                             {"quality_budget", 40}}}};
  expect_valid(report_schema(), run_report("search", search_cfg));

  expect_valid(report_schema(), run_report("surrogate", json::object()));
  const json infeasible_cfg = {{"surrogate", {{"preset", "infeasible-1d"}}}};
  expect_valid(report_schema(), run_report("surrogate", infeasible_cfg));
  const json constant_cfg = {{"surrogate", {{"preset", "constant"}}}};
  expect_valid(report_schema(), run_report("surrogate", constant_cfg));
  const json table_cfg = {
      {"surrogate",
       {{"preset", "table-1d"},
        {"table",
         {{"x", json::array({0.0, 0.5, 1.0})},
          {"ensemble_error", json::array({0.3, 0.25, 0.2})},
          {"correlation", json::array({0.6, 0.5, 0.4})},
          {"delta_error", json::array({0.05, 0.0, -0.05})},
          {"variance", json::array({0.05, 0.05, 0.05})}}}}}};
  expect_valid(report_schema(), run_report("surrogate", table_cfg));

  const json fidelity_cfg = {{"fidelity",
                              {{"sample_grid", json::array({100, 400})}, {"replications", 8}}}};
  expect_valid(report_schema(), run_report("estimate-fidelity", fidelity_cfg));
}

TEST_CASE("report schema pins the envelope frame") {
  json report = run_report("cost", json::object());
  json broken = report;
  broken.erase("timing");
  CHECK_FALSE(cli::matches_schema(report_schema(), broken));
  broken = report;
  broken["command"] = "costs";
  CHECK_FALSE(cli::matches_schema(report_schema(), broken));
  broken = report;
  broken["surprise"] = 1;
  CHECK_FALSE(cli::matches_schema(report_schema(), broken));
  broken = report;
  broken["results"]["traditional"] = "expensive";
  CHECK_FALSE(cli::matches_schema(report_schema(), broken));
  // a results document must match exactly one command branch
  broken = report;
  broken["results"].erase("sweep");
  CHECK_FALSE(cli::matches_schema(report_schema(), broken));
}

TEST_CASE("quality table and fidelity rows validate row by row") {
  const json search_cfg = {{"search",
                            {{"budget", 5},
                             {"sample_count", 300},
                             {"quality_sample_counts", json::array({200, 500})},
                             {"quality_budget", 60}}}};
  const json search = run_results("search", search_cfg);
  REQUIRE(search.at("quality_table").is_array());
  for (const auto& row : search.at("quality_table")) {
    const auto errors = cli::schema_errors_at(report_schema(), "#/definitions/quality_row", row);
    for (const auto& e : errors) INFO("quality row violation: ", e);
    CHECK(errors.empty());
  }

  const json fidelity_cfg = {{"fidelity",
                              {{"sample_grid", json::array({50, 200})}, {"replications", 6}}}};
  const json fidelity = run_results("estimate-fidelity", fidelity_cfg);
  REQUIRE(fidelity.at("rows").is_array());
  REQUIRE(fidelity.at("rows").size() == 2u);
  for (const auto& row : fidelity.at("rows")) {
    const auto errors = cli::schema_errors_at(report_schema(), "#/definitions/fidelity_row", row);
    for (const auto& e : errors) INFO("fidelity row violation: ", e);
    CHECK(errors.empty());
  }
}

TEST_CASE("wire schema matches the protocol messages") {
  const json request = {{"v", 1},
                        {"run_id", "run"},
                        {"iteration", 1},
                        {"bin", 0},
                        {"bin_count", 3},
                        {"best_descriptor", nullptr},
                        {"best_stats", {{"E", 0.25}, {"var", 0.05}, {"rho", 0.5}}},
                        {"history_digest", json::array()}};
  CHECK(cli::schema_errors_at(wire_schema(), "#/definitions/request", request).empty());
  expect_valid(wire_schema(), request);

  json with_best = request;
  with_best["iteration"] = 2;
  with_best["best_descriptor"] = {{"id", "ext-1"},
                                  {"complexity_bin", 0},
                                  {"payload", {{"error", 0.24}, {"variance", 0.05}}},
                                  {"proposer_name", "external"}};
  with_best["history_digest"] = json::array({"ext-1"});
  expect_valid(wire_schema(), with_best);

  const json response = {{"v", 1},
                         {"id", "cand-7"},
                         {"complexity_bin", 2},
                         {"payload", {{"error", 0.23}, {"variance", 0.05}, {"correlation", 0.4}}}};
  CHECK(cli::schema_errors_at(wire_schema(), "#/definitions/response", response).empty());
  expect_valid(wire_schema(), response);

  json bad = response;
  bad["v"] = 2;
  CHECK_FALSE(cli::schema_errors_at(wire_schema(), "#/definitions/response", bad).empty());
  bad = response;
  bad.erase("id");
  CHECK_FALSE(cli::schema_errors_at(wire_schema(), "#/definitions/response", bad).empty());
  bad = response;
  bad["payload"]["note"] = "fast";
  CHECK_FALSE(cli::schema_errors_at(wire_schema(), "#/definitions/response", bad).empty());
  bad = request;
  bad["surprise"] = true;
  CHECK_FALSE(cli::matches_schema(wire_schema(), bad));
}

TEST_CASE("csv flattening") {
  const json report = run_report("cost", json::object());
  const std::string csv = cli::to_csv(report);
  CHECK(csv.rfind("key,value\n", 0) == 0u);
  CHECK(csv.find("\nresults.traditional,100000\n") != std::string::npos);
  CHECK(csv.find("\nresults.reduction_factor,90.909090909090907\n") != std::string::npos);
  CHECK(csv.find("results.sweep[0].n_trials,10\n") != std::string::npos);
  CHECK(csv.find("config.cost.learner_cost,1\n") != std::string::npos);
  CHECK(csv.find("command,cost\n") != std::string::npos);

  const std::string quoted = cli::to_csv(json{{"k", "needs,quoting \"here\""}});
  CHECK(quoted.find("k,\"needs,quoting \"\"here\"\"\"") != std::string::npos);
  const std::string boolean = cli::to_csv(json{{"flag", true}, {"gap", nullptr}});
  CHECK(boolean.find("flag,true\n") != std::string::npos);
  CHECK(boolean.find("gap,\n") != std::string::npos);
}

TEST_CASE("trials override lands in the command it names") {
  const json doc = {{"trials", 4}};
  {
    ens::cli::RunConfig cfg = cli::parse_config(doc);
    cli::apply_trials(cfg, "verify-theory");
    CHECK(cfg.verify.trials == 4);
    CHECK_FALSE(cfg.top.trials.has_value());
    CHECK_FALSE(cli::echo_config(cfg).contains("trials"));
  }
  {
    ens::cli::RunConfig cfg = cli::parse_config(doc);
    cli::apply_trials(cfg, "search");
    CHECK(cfg.search.budget == 4);
    CHECK(cfg.verify.trials == 10);
  }
  {
    ens::cli::RunConfig cfg = cli::parse_config(doc);
    cli::apply_trials(cfg, "surrogate");
    CHECK(cfg.surrogate.options.multistart == 4);
  }
  {
    ens::cli::RunConfig cfg = cli::parse_config(doc);
    cli::apply_trials(cfg, "estimate-fidelity");
    CHECK(cfg.fidelity.replications == 4);
  }
  {
    ens::cli::RunConfig cfg = cli::parse_config(doc);
    cli::apply_trials(cfg, "cost");
    CHECK_FALSE(cfg.top.trials.has_value());
    CHECK(cfg.cost.model.n_trials == 1000);  // no budget knob for cost; value consumed, unused
  }
  CHECK_THROWS_AS(
      [] {
        ens::cli::RunConfig cfg = cli::parse_config(json{{"trials", 1}});
        cli::apply_trials(cfg, "estimate-fidelity");
      }(),
      cli::ConfigError);
}

TEST_CASE("config rejection reaches every block") {
  auto rejects = [](const json& doc) {
    CHECK_THROWS_AS(cli::parse_config(doc), cli::ConfigError);
  };
  rejects(json{{"bogus", 1}});
  rejects(json{{"sim", {{"rho", 0.2}}}});
  rejects(json{{"sim", {{"target_correlation", -0.5}}}});       // below the PSD bound at M=10
  rejects(json{{"sim", {{"target_error", 0.01}}}});             // cannot cover noise + variance
  rejects(json{{"sim", {{"label_model", "sometimes"}}}});
  rejects(json{{"format", "xml"}});
  rejects(json{{"seed", -3}});
  rejects(json{{"verify", {{"agreement_floor", 1.5}}}});
  rejects(json{{"bagging", {{"decorrelation_slope", 0.2}}}});
  rejects(json{{"cost", {{"n_trials", 0}}}});
  rejects(json{{"search", {{"proposer", "psychic"}}}});
  rejects(json{{"search", {{"proposer", "external"}}}});        // missing proposer_url
  rejects(json{{"search", {{"baseline", {{"variance", 0.0}}}}}});
  rejects(json{{"search", {{"scripted", json::array({json{{"payload", {{"error", "high"}}}}})}}}});
  rejects(json{{"surrogate", {{"multistart", 0}}}});
  rejects(json{{"surrogate", {{"table", {{"x", json::array({0.0, 1.0})}}}}}});  // missing columns
  rejects(json{{"fidelity", {{"replications", 1}}}});
  rejects(json{{"fidelity", {{"jitter", {{"variance_rel", 1.0}}}}}});
  CHECK_THROWS_AS(cli::run_command("surrogate", json{{"surrogate", {{"preset", "cubic"}}}}),
                  cli::ConfigError);
  CHECK_THROWS_AS(cli::run_command("surrogate", json{{"surrogate", {{"preset", "table-1d"}}}}),
                  cli::ConfigError);  // preset without its table
  CHECK_THROWS_AS(cli::run_command("launch", json::object()), cli::ConfigError);
}

TEST_CASE("echoed config reproduces the run") {
  const json seeded = {{"seed", 9},
                       {"search", {{"budget", 8}, {"sample_count", 400}}}};
  const auto first = cli::run_command("search", seeded);
  const auto second = cli::run_command("search", first.envelope.config);
  CHECK(first.envelope.results == second.envelope.results);
  CHECK(first.envelope.config == second.envelope.config);
}
