#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace ens::cli {

/// Validates an instance against the pragmatic JSON-Schema subset the shipped
/// schemas use: type (string or list), enum, required, properties,
/// additionalProperties (boolean or schema), items, oneOf, minimum, maximum,
/// and $ref into #/definitions of the same document. Returns one message per
/// violation; an empty list means the instance conforms.
std::vector<std::string> schema_errors(const nlohmann::json& schema,
                                       const nlohmann::json& instance);

/// Same, but validates against the subschema the JSON pointer ref (e.g.
/// "#/definitions/request") selects inside root.
std::vector<std::string> schema_errors_at(const nlohmann::json& root, const std::string& ref,
                                          const nlohmann::json& instance);

inline bool matches_schema(const nlohmann::json& schema, const nlohmann::json& instance) {
  return schema_errors(schema, instance).empty();
}

}  // namespace ens::cli
