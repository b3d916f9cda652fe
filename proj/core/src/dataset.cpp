#include "trimfit/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "trimfit/error.hpp"

namespace trimfit {

Dataset::Dataset(Matrix X, Vector y) : X_(std::move(X)), y_(std::move(y)) {
  if (X_.rows() != y_.size()) {
    throw InvalidArgument("dataset: X has " + std::to_string(X_.rows()) +
                          " rows but y has " + std::to_string(y_.size()) +
                          " entries");
  }
  if (!X_.allFinite() || !y_.allFinite()) {
    throw InvalidArgument("dataset: non-finite entry");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Matrix Xs(static_cast<Eigen::Index>(rows.size()), X_.cols());
  Vector ys(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n()) throw InvalidArgument("dataset: row index out of range");
    auto i = static_cast<Eigen::Index>(rows[r]);
    Xs.row(static_cast<Eigen::Index>(r)) = X_.row(i);
    ys(static_cast<Eigen::Index>(r)) = y_(i);
  }
  Dataset out;
  out.X_ = std::move(Xs);
  out.y_ = std::move(ys);
  return out;
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "y";
  for (std::size_t c = 0; c < data.d(); ++c) out << ",x" << (c + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < data.X().rows(); ++i) {
    out << format_double(data.y()(i));
    for (Eigen::Index c = 0; c < data.X().cols(); ++c) {
      out << ',' << format_double(data.X()(i, c));
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset_csv(out, data);
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& field, std::size_t line_no) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < field.size() && (field[used] == ' ' || field[used] == '\r')) ++used;
  if (used != field.size() || field.empty()) {
    throw IoError("dataset csv line " + std::to_string(line_no) +
                  ": cannot parse '" + field + "'");
  }
  return value;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t d = 0;
  bool have_header = false;
  std::vector<double> ys;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_fields(line);
    if (!have_header) {
      if (fields.empty() || fields[0] != "y") {
        throw IoError("dataset csv: header must start with 'y'");
      }
      for (std::size_t c = 1; c < fields.size(); ++c) {
        if (fields[c] != "x" + std::to_string(c)) {
          throw IoError("dataset csv: unexpected header column '" + fields[c] + "'");
        }
      }
      d = fields.size() - 1;
      if (d == 0) throw IoError("dataset csv: no feature columns");
      have_header = true;
      continue;
    }
    if (fields.size() != d + 1) {
      throw IoError("dataset csv line " + std::to_string(line_no) + ": expected " +
                    std::to_string(d + 1) + " fields, got " +
                    std::to_string(fields.size()));
    }
    ys.push_back(parse_field(fields[0], line_no));
    for (std::size_t c = 1; c <= d; ++c) xs.push_back(parse_field(fields[c], line_no));
  }
  if (!have_header) throw IoError("dataset csv: missing header");
  const auto n = static_cast<Eigen::Index>(ys.size());
  Matrix X(n, static_cast<Eigen::Index>(d));
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = ys[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      X(i, c) = xs[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(c)];
    }
  }
  try {
    return Dataset(std::move(X), std::move(y));
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("dataset csv: ") + e.what());
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in);
}

}  // namespace trimfit
