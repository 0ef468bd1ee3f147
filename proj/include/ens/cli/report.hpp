#pragma once

#include <json.hpp>

#include <string>

namespace ens::cli {

inline constexpr const char* kToolVersion = "1.0.0";

/// Everything one invocation emits: the effective configuration, wall-clock
/// timing, and the command's result document. Stable across versions; the
/// shipped report schema pins the layout.
struct ReportEnvelope {
  std::string tool_version = kToolVersion;
  std::string command;
  nlohmann::json config;
  double elapsed_seconds = 0.0;
  nlohmann::json results;
};

nlohmann::json to_json(const ReportEnvelope& envelope);

/// Flattens a report document to two-column CSV (key,value), one scalar per
/// row, paths like results.sweep.alpha[3]. Doubles carry 17 significant
/// digits so the CSV round-trips bit-exactly.
std::string to_csv(const nlohmann::json& doc);

}  // namespace ens::cli
