#pragma once

// Structural check of a JSON value against the subset of JSON Schema used in
// docs/schemas: type, required, properties, additionalProperties (schema
// form), items, const, enum, oneOf, minItems/maxItems, minimum.

#include <string>
#include <vector>

#include <json.hpp>

#include "crcbn/io.hpp"

namespace crcbn::testing {

inline nlohmann::json load_schema(const std::string& name) {
  return parse_json_file(std::string(CRCBN_SOURCE_DIR) + "/docs/schemas/" + name + ".schema.json");
}

inline void schema_errors(const nlohmann::json& s, const nlohmann::json& v, const std::string& at,
                          std::vector<std::string>& out) {
  using nlohmann::json;
  if (s.contains("const") && v != s["const"]) out.push_back(at + ": expected " + s["const"].dump());
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) out.push_back(at + ": not in enum");
  }
  if (s.contains("oneOf")) {
    std::size_t matches = 0;
    for (const auto& alt : s["oneOf"]) {
      std::vector<std::string> errs;
      schema_errors(alt, v, at, errs);
      matches += errs.empty();
    }
    if (matches != 1) out.push_back(at + ": matches " + std::to_string(matches) + " oneOf branches");
  }
  if (s.contains("type")) {
    const auto t = s["type"].get<std::string>();
    const bool ok = (t == "object" && v.is_object()) || (t == "array" && v.is_array()) ||
                    (t == "string" && v.is_string()) || (t == "number" && v.is_number()) ||
                    (t == "integer" && v.is_number_integer()) || (t == "boolean" && v.is_boolean()) ||
                    (t == "null" && v.is_null());
    if (!ok) {
      out.push_back(at + ": expected " + t + ", got " + v.type_name());
      return;
    }
  }
  if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>())
    out.push_back(at + ": below minimum");
  if (v.is_object()) {
    for (const auto& r : s.value("required", json::array()))
      if (!v.contains(r.get<std::string>())) out.push_back(at + ": missing " + r.get<std::string>());
    const auto props = s.value("properties", json::object());
    for (const auto& [k, sub] : v.items()) {
      if (props.contains(k))
        schema_errors(props[k], sub, at + "." + k, out);
      else if (s.contains("additionalProperties") && s["additionalProperties"].is_object())
        schema_errors(s["additionalProperties"], sub, at + "." + k, out);
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) out.push_back(at + ": too few items");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) out.push_back(at + ": too many items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) schema_errors(s["items"], v[i], at + "[" + std::to_string(i) + "]", out);
  }
}

/// Empty when `value` conforms to docs/schemas/<name>.schema.json.
inline std::vector<std::string> check_against(const std::string& name, const nlohmann::json& value) {
  std::vector<std::string> out;
  schema_errors(load_schema(name), value, "$", out);
  return out;
}

}  // namespace crcbn::testing
