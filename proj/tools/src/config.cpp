#include "config.hpp"

#include <fstream>
#include <sstream>

#include <trimfit/error.hpp>

namespace trimfit::cli {

namespace {

std::string field_name(std::string_view context, std::string_view key) {
  std::string out(context);
  if (!out.empty()) out += '.';
  out += key;
  return out;
}

Matrix matrix_from_rows(const json& rows, std::string_view context) {
  if (!rows.is_array() || rows.empty()) {
    throw InvalidArgument(std::string(context) + ": expected a non-empty list of rows");
  }
  const auto first = get_number_list(rows[0], context);
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(first.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = get_number_list(rows[r], context);
    if (row.size() != first.size()) throw InvalidArgument(std::string(context) + ": ragged rows");
    for (std::size_t c = 0; c < row.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return out;
}

}  // namespace

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

const json& require_field(const json& object, std::string_view key, std::string_view context) {
  if (!object.is_object()) {
    throw InvalidArgument(std::string(context.empty() ? "config" : context) + ": expected an object");
  }
  auto it = object.find(std::string(key));
  if (it == object.end()) {
    throw InvalidArgument("missing required field '" + field_name(context, key) + "'");
  }
  return *it;
}

double get_number(const json& object, std::string_view key, std::string_view context) {
  const json& v = require_field(object, key, context);
  if (!v.is_number()) throw InvalidArgument("field '" + field_name(context, key) + "' must be a number");
  return v.get<double>();
}

double get_number_or(const json& object, std::string_view key, double fallback,
                     std::string_view context) {
  if (!object.contains(std::string(key))) return fallback;
  return get_number(object, key, context);
}

std::uint64_t get_count(const json& object, std::string_view key, std::string_view context) {
  const json& v = require_field(object, key, context);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw InvalidArgument("field '" + field_name(context, key) + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::uint64_t get_count_or(const json& object, std::string_view key, std::uint64_t fallback,
                           std::string_view context) {
  if (!object.contains(std::string(key))) return fallback;
  return get_count(object, key, context);
}

std::string get_string_or(const json& object, std::string_view key, std::string fallback,
                          std::string_view context) {
  if (!object.contains(std::string(key))) return fallback;
  const json& v = object.at(std::string(key));
  if (!v.is_string()) throw InvalidArgument("field '" + field_name(context, key) + "' must be a string");
  return v.get<std::string>();
}

bool get_bool_or(const json& object, std::string_view key, bool fallback, std::string_view context) {
  if (!object.contains(std::string(key))) return fallback;
  const json& v = object.at(std::string(key));
  if (!v.is_boolean()) throw InvalidArgument("field '" + field_name(context, key) + "' must be true or false");
  return v.get<bool>();
}

std::vector<double> get_number_list(const json& value, std::string_view context) {
  if (!value.is_array()) throw InvalidArgument(std::string(context) + ": expected a list of numbers");
  std::vector<double> out;
  for (const auto& v : value) {
    if (!v.is_number()) throw InvalidArgument(std::string(context) + ": expected a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void check_version(const json& root, std::string_view context) {
  const json& v = require_field(root, "version", context);
  if (!v.is_number_integer() || v.get<int>() != kConfigVersion) {
    throw InvalidArgument("unsupported config version " + v.dump() + " (expected " +
                          std::to_string(kConfigVersion) + ")");
  }
}

MixtureSpec parse_mixture(const json& model) {
  const json& comps = require_field(model, "components", "model");
  if (!comps.is_array() || comps.empty()) {
    throw InvalidArgument("field 'model.components' must be a non-empty list of vectors");
  }
  // Components are listed one vector per entry, i.e. the columns of theta*.
  const Matrix rows = matrix_from_rows(comps, "model.components");
  MixtureSpec spec;
  spec.components = rows.transpose();
  if (model.contains("weights")) {
    spec.weights = get_number_list(model.at("weights"), "model.weights");
  } else {
    spec.weights.assign(spec.m(), 1.0 / static_cast<double>(spec.m()));
  }
  if (model.contains("covariances")) {
    const json& covs = model.at("covariances");
    if (!covs.is_array()) throw InvalidArgument("field 'model.covariances' must be a list");
    for (const auto& c : covs) {
      if (c.is_null() || (c.is_string() && c.get<std::string>() == "identity")) {
        spec.covariances.emplace_back(std::nullopt);
      } else if (c.is_array() && !c.empty() && c[0].is_number()) {
        // Shorthand: a diagonal.
        const auto diag = get_number_list(c, "model.covariances");
        spec.covariances.emplace_back(Matrix(to_vector(diag).asDiagonal()));
      } else {
        spec.covariances.emplace_back(matrix_from_rows(c, "model.covariances"));
      }
    }
  }
  spec.validate();
  return spec;
}

CorruptionSpec parse_corruption(const json* corruption) {
  CorruptionSpec out;
  if (corruption == nullptr) return out;
  out.gamma_star = get_number_or(*corruption, "gamma_star", 0.0, "corruption");
  out.adversary = parse_adversary(get_string_or(
      *corruption, "adversary", out.gamma_star > 0 ? "oblivious-random" : "none", "corruption"));
  out.magnitude = get_number_or(*corruption, "magnitude", 1.0, "corruption");
  out.validate();
  return out;
}

GenerativeModel parse_generative(const json& root) {
  GenerativeModel g;
  g.seed = get_count(root, "seed", "");
  g.n = get_count(root, "n", "");
  g.spec = parse_mixture(require_field(root, "model", ""));
  g.corruption = parse_corruption(root.contains("corruption") ? &root.at("corruption") : nullptr);
  return g;
}

json generative_to_json(const GenerativeModel& model) {
  json comps = json::array();
  for (Eigen::Index j = 0; j < model.spec.components.cols(); ++j) {
    const Vector c = model.spec.components.col(j);
    comps.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  json out;
  out["seed"] = model.seed;
  out["n"] = model.n;
  out["model"] = {{"components", comps}, {"weights", model.spec.weights}};
  out["corruption"] = {{"gamma_star", model.corruption.gamma_star},
                       {"adversary", std::string(to_string(model.corruption.adversary))},
                       {"magnitude", model.corruption.magnitude}};
  return out;
}

std::vector<double> parse_number_list(std::string_view text) {
  std::string cleaned(text);
  for (char& c : cleaned) {
    if (c == ',' || c == '[' || c == ']' || c == ';') c = ' ';
  }
  std::istringstream in(cleaned);
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw InvalidArgument("not a number: '" + token + "'");
    out.push_back(v);
  }
  return out;
}

Vector to_vector(const std::vector<double>& values) {
  Vector out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out(static_cast<Eigen::Index>(i)) = values[i];
  return out;
}

Vector read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return to_vector(parse_number_list(buffer.str()));
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      rows.push_back(parse_number_list(line));
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ": " + e.what());
    }
    if (rows.back().size() != rows.front().size()) throw IoError(path.string() + ": ragged rows");
  }
  if (rows.empty() || rows.front().empty()) throw IoError(path.string() + ": empty matrix");
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace trimfit::cli
