#include "ens/cli/report.hpp"

#include <cstdio>

namespace ens::cli {
namespace {

using nlohmann::json;

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (const char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string format_number(const json& v) {
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
  return buf;
}

void flatten(const json& v, const std::string& path, std::string& out) {
  if (v.is_object()) {
    for (const auto& [key, member] : v.items())
      flatten(member, path.empty() ? key : path + "." + key, out);
    return;
  }
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      flatten(v[i], path + "[" + std::to_string(i) + "]", out);
    return;
  }
  out += csv_quote(path);
  out += ',';
  if (v.is_string()) {
    out += csv_quote(v.get<std::string>());
  } else if (v.is_boolean()) {
    out += v.get<bool>() ? "true" : "false";
  } else if (v.is_number()) {
    out += format_number(v);
  }
  // null leaves the value cell empty
  out += '\n';
}

}  // namespace

json to_json(const ReportEnvelope& envelope) {
  json doc;
  doc["tool_version"] = envelope.tool_version;
  doc["command"] = envelope.command;
  doc["config"] = envelope.config;
  doc["timing"] = json{{"elapsed_seconds", envelope.elapsed_seconds}};
  doc["results"] = envelope.results;
  return doc;
}

std::string to_csv(const json& doc) {
  std::string out = "key,value\n";
  flatten(doc, "", out);
  return out;
}

}  // namespace ens::cli
