#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "rootflow/root_system.hpp"

namespace rootflow {

// nlohmann objects keep keys sorted, so dumps are deterministic byte-for-byte

inline nlohmann::json check_entry_to_json(const CheckEntry& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["label"] = e.label;
  j["residual"] = e.residual;
  j["tolerance"] = e.tolerance;
  j["pass"] = e.pass;
  j["surrogate"] = e.surrogate;
  j["witness"] = e.witness;
  j["cases_checked"] = e.cases_checked;
  j["untestable"] = e.untestable;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : e.table) table.push_back({row[0], row[1]});
  j["table"] = std::move(table);
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, value] : e.metrics) metrics[name] = value;
  j["metrics"] = std::move(metrics);
  return j;
}

inline nlohmann::json verification_to_json(const VerificationReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const CheckEntry& e : r.entries) entries.push_back(check_entry_to_json(e));
  nlohmann::json j;
  j["entries"] = std::move(entries);
  j["overall_pass"] = r.overall_pass();
  return j;
}

namespace detail {

inline bool json_type_matches(const nlohmann::json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "number") return v.is_number();
  if (t == "integer") return v.is_number_integer();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

inline void validate_schema_node(const nlohmann::json& doc, const nlohmann::json& schema,
                                 const std::string& path, std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const std::string t = schema["type"].get<std::string>();
    if (!json_type_matches(doc, t)) {
      errors.push_back(path + ": expected " + t);
      return;
    }
  }
  if (schema.contains("enum")) {
    bool hit = false;
    for (const auto& v : schema["enum"]) hit = hit || (v == doc);
    if (!hit) errors.push_back(path + ": value not in enum");
  }
  if (doc.is_object()) {
    if (schema.contains("required"))
      for (const auto& k : schema["required"])
        if (!doc.contains(k.get<std::string>()))
          errors.push_back(path + ": missing required key '" + k.get<std::string>() + "'");
    const bool allow_extra =
        !schema.contains("additionalProperties") || schema["additionalProperties"] != false;
    if (schema.contains("properties")) {
      const auto& props = schema["properties"];
      for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (props.contains(it.key()))
          validate_schema_node(it.value(), props[it.key()], path + "/" + it.key(), errors);
        else if (!allow_extra)
          errors.push_back(path + ": unexpected key '" + it.key() + "'");
      }
    }
  }
  if (doc.is_array() && schema.contains("items")) {
    int i = 0;
    for (const auto& v : doc) {
      validate_schema_node(v, schema["items"], path + "/" + std::to_string(i), errors);
      ++i;
    }
  }
}

}  // namespace detail

/// Validates a document against the subset of JSON Schema the shipped schema
/// file uses: type, required, properties, additionalProperties, items, enum.
inline std::vector<std::string> validate_against_schema(const nlohmann::json& doc,
                                                        const nlohmann::json& schema) {
  std::vector<std::string> errors;
  detail::validate_schema_node(doc, schema, "#", errors);
  return errors;
}

}  // namespace rootflow
