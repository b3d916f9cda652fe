#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace trimfit::cli {

/// Text of a schema shipped in tools/schemas, by file stem (e.g. "recovery").
/// Empty when no such schema exists.
std::string_view embedded_schema(std::string_view name);

/// Checks `doc` against the subset of JSON Schema used by the shipped
/// schemas: type, const, enum, required, properties, items, minimum and
/// maximum. Returns one message per violation, each prefixed with the
/// JSON pointer of the offending value.
std::vector<std::string> validate(const nlohmann::json& doc, const nlohmann::json& schema);

/// Validates against an embedded schema and throws trimfit::Error listing
/// the violations.
void require_valid(const nlohmann::json& doc, std::string_view schema_name);

}  // namespace trimfit::cli
