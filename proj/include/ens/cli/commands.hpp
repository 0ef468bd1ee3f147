#pragma once

#include "ens/cli/config.hpp"
#include "ens/cli/report.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace ens::cli {

struct CommandOutcome {
  ReportEnvelope envelope;
  int exit_code = 0;
};

/// The six subcommands, in CLI declaration order.
const std::vector<std::string>& command_names();

/// Parses the document, applies the generic trials override, runs the
/// command, and stamps the effective-config echo plus timing into the
/// envelope. ConfigError propagates to the caller (exit code 2); exit code 1
/// marks a failed theory invariant, 3 an unreachable external proposer.
CommandOutcome run_command(const std::string& command, const nlohmann::json& config_doc);

}  // namespace ens::cli
