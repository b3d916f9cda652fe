#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <trimfit/model.hpp>

namespace trimfit::cli {

using json = nlohmann::json;

inline constexpr int kConfigVersion = 1;

/// Parses a JSON file; IoError on a missing file or a syntax error.
json load_json(const std::filesystem::path& path);

/// Throws InvalidArgument naming `context.key` when the field is absent.
const json& require_field(const json& object, std::string_view key, std::string_view context);

double get_number(const json& object, std::string_view key, std::string_view context);
double get_number_or(const json& object, std::string_view key, double fallback,
                     std::string_view context);
std::uint64_t get_count(const json& object, std::string_view key, std::string_view context);
std::uint64_t get_count_or(const json& object, std::string_view key, std::uint64_t fallback,
                           std::string_view context);
std::string get_string_or(const json& object, std::string_view key, std::string fallback,
                          std::string_view context);
bool get_bool_or(const json& object, std::string_view key, bool fallback, std::string_view context);
std::vector<double> get_number_list(const json& value, std::string_view context);

/// Requires "version": kConfigVersion at the top level.
void check_version(const json& root, std::string_view context);

/// Mixture components, weights and covariances from the "model" object.
MixtureSpec parse_mixture(const json& model);
/// The optional "corruption" object; absent means no corruption.
CorruptionSpec parse_corruption(const json* corruption);

/// Everything generate_mlrc needs, from a config root with "seed", "n",
/// "model" and optionally "corruption".
struct GenerativeModel {
  MixtureSpec spec;
  CorruptionSpec corruption;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};
GenerativeModel parse_generative(const json& root);
json generative_to_json(const GenerativeModel& model);

/// Comma- or whitespace-separated numbers.
std::vector<double> parse_number_list(std::string_view text);
Vector to_vector(const std::vector<double>& values);
/// A vector stored as a JSON array or as plain separated numbers.
Vector read_vector_file(const std::filesystem::path& path);
/// Header-less CSV, one matrix row per line.
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Writes `text`, creating parent directories; IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace trimfit::cli
