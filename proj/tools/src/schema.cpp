#include "schema.hpp"

#include <trimfit/error.hpp>

namespace trimfit::cli {

namespace {

using json = nlohmann::json;

bool has_type(const json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "null") return value.is_null();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  return false;
}

void check(const json& value, const json& schema, const std::string& where,
           std::vector<std::string>& errors) {
  const std::string at = where.empty() ? "/" : where;
  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_array()) {
      for (const auto& t : *it) ok = ok || has_type(value, t.get<std::string>());
    } else {
      ok = has_type(value, it->get<std::string>());
    }
    if (!ok) {
      errors.push_back(at + ": expected type " + it->dump());
      return;
    }
  }
  if (auto it = schema.find("const"); it != schema.end() && value != *it) {
    errors.push_back(at + ": expected " + it->dump());
  }
  if (auto it = schema.find("enum"); it != schema.end()) {
    bool found = false;
    for (const auto& option : *it) found = found || value == option;
    if (!found) errors.push_back(at + ": " + value.dump() + " not in " + it->dump());
  }
  if (value.is_number()) {
    const double v = value.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && v < it->get<double>()) {
      errors.push_back(at + ": below minimum " + it->dump());
    }
    if (auto it = schema.find("maximum"); it != schema.end() && v > it->get<double>()) {
      errors.push_back(at + ": above maximum " + it->dump());
    }
  }
  if (value.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!value.contains(key.get<std::string>())) {
          errors.push_back(at + ": missing required field \"" + key.get<std::string>() + "\"");
        }
      }
    }
    if (auto it = schema.find("properties"); it != schema.end()) {
      for (const auto& [key, sub] : it->items()) {
        if (auto v = value.find(key); v != value.end()) check(*v, sub, where + "/" + key, errors);
      }
    }
  }
  if (value.is_array()) {
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        check(value[i], *it, where + "/" + std::to_string(i), errors);
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate(const json& doc, const json& schema) {
  std::vector<std::string> errors;
  check(doc, schema, "", errors);
  return errors;
}

void require_valid(const json& doc, std::string_view schema_name) {
  const std::string_view text = embedded_schema(schema_name);
  if (text.empty()) throw Error("no embedded schema named " + std::string(schema_name));
  const auto errors = validate(doc, json::parse(text));
  if (errors.empty()) return;
  std::string message = "output failed " + std::string(schema_name) + " schema validation:";
  for (const auto& e : errors) message += "\n  " + e;
  throw Error(message);
}

}  // namespace trimfit::cli
