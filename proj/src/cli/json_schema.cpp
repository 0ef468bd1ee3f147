#include "ens/cli/json_schema.hpp"

#include <cstddef>
#include <stdexcept>

namespace ens::cli {
namespace {

using nlohmann::json;

bool type_matches(const std::string& name, const json& value) {
  if (name == "object") return value.is_object();
  if (name == "array") return value.is_array();
  if (name == "string") return value.is_string();
  if (name == "number") return value.is_number();
  if (name == "integer") return value.is_number_integer();
  if (name == "boolean") return value.is_boolean();
  if (name == "null") return value.is_null();
  throw std::runtime_error("json_schema: unsupported type name '" + name + "'");
}

void validate_node(const json& root, const json& schema, const json& value,
                   const std::string& path, std::vector<std::string>& errors);

const json& resolve_ref(const json& root, const std::string& ref) {
  if (ref.empty() || ref.front() != '#')
    throw std::runtime_error("json_schema: only local $ref supported, got '" + ref + "'");
  return root.at(json::json_pointer(ref.substr(1)));
}

void validate_type(const json& schema, const json& value, const std::string& path,
                   std::vector<std::string>& errors) {
  const json& spec = schema.at("type");
  if (spec.is_string()) {
    if (!type_matches(spec.get<std::string>(), value))
      errors.push_back(path + ": expected type " + spec.get<std::string>());
    return;
  }
  for (const auto& name : spec)
    if (type_matches(name.get<std::string>(), value)) return;
  errors.push_back(path + ": value matches none of the allowed types");
}

void validate_object(const json& root, const json& schema, const json& value,
                     const std::string& path, std::vector<std::string>& errors) {
  const json* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
  if (schema.contains("required"))
    for (const auto& key : schema.at("required"))
      if (!value.contains(key.get<std::string>()))
        errors.push_back(path + ": missing required property '" + key.get<std::string>() + "'");
  for (const auto& [key, member] : value.items()) {
    if (props != nullptr && props->contains(key)) {
      validate_node(root, props->at(key), member, path + "/" + key, errors);
    } else if (schema.contains("additionalProperties")) {
      const json& extra = schema.at("additionalProperties");
      if (extra.is_boolean()) {
        if (!extra.get<bool>())
          errors.push_back(path + ": unexpected property '" + key + "'");
      } else {
        validate_node(root, extra, member, path + "/" + key, errors);
      }
    }
  }
}

void validate_node(const json& root, const json& schema, const json& value,
                   const std::string& path, std::vector<std::string>& errors) {
  if (schema.contains("$ref")) {
    validate_node(root, resolve_ref(root, schema.at("$ref").get<std::string>()), value, path,
                  errors);
    return;
  }
  if (schema.contains("oneOf")) {
    std::size_t hits = 0;
    for (const auto& branch : schema.at("oneOf")) {
      std::vector<std::string> branch_errors;
      validate_node(root, branch, value, path, branch_errors);
      if (branch_errors.empty()) ++hits;
    }
    if (hits != 1)
      errors.push_back(path + ": matched " + std::to_string(hits) +
                       " oneOf branches, expected exactly 1");
  }
  if (schema.contains("type")) validate_type(schema, value, path, errors);
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& allowed : schema.at("enum"))
      if (allowed == value) {
        found = true;
        break;
      }
    if (!found) errors.push_back(path + ": value not in enum");
  }
  if (value.is_object()) validate_object(root, schema, value, path, errors);
  if (value.is_array() && schema.contains("items")) {
    const json& items = schema.at("items");
    for (std::size_t i = 0; i < value.size(); ++i)
      validate_node(root, items, value[i], path + "/" + std::to_string(i), errors);
  }
  if (value.is_number()) {
    const double x = value.get<double>();
    if (schema.contains("minimum") && x < schema.at("minimum").get<double>())
      errors.push_back(path + ": value below minimum");
    if (schema.contains("maximum") && x > schema.at("maximum").get<double>())
      errors.push_back(path + ": value above maximum");
  }
}

}  // namespace

std::vector<std::string> schema_errors(const nlohmann::json& schema,
                                       const nlohmann::json& instance) {
  std::vector<std::string> errors;
  validate_node(schema, schema, instance, "#", errors);
  return errors;
}

std::vector<std::string> schema_errors_at(const nlohmann::json& root, const std::string& ref,
                                          const nlohmann::json& instance) {
  std::vector<std::string> errors;
  json wrapper;
  wrapper["$ref"] = ref;
  validate_node(root, wrapper, instance, "#", errors);
  return errors;
}

}  // namespace ens::cli
