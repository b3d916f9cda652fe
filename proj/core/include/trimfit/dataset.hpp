#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace trimfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sorted, duplicate-free list of sample indices.
using IndexSet = std::vector<std::size_t>;

/// Features X (n x d) and responses y (n). Immutable once built.
class Dataset {
 public:
  Dataset() = default;

  /// Throws InvalidArgument on a row-count mismatch or a non-finite entry.
  Dataset(Matrix X, Vector y);

  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }
  std::size_t n() const { return static_cast<std::size_t>(X_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(X_.cols()); }

  /// Rows listed in `rows`, in that order.
  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.X_.rows() == b.X_.rows() && a.X_.cols() == b.X_.cols() &&
           a.X_ == b.X_ && a.y_ == b.y_;
  }

 private:
  Matrix X_;
  Vector y_;
};

/// Writes `%.17g` decimal, round-trip exact for IEEE doubles.
std::string format_double(double value);

/// CSV with header `y,x1,...,xd`, one sample per row.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Parses the CSV written by write_dataset_csv. Blank lines and lines
/// starting with '#' are skipped. Throws IoError on malformed input.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace trimfit
