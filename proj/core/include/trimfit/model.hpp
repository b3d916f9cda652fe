#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trimfit/dataset.hpp"
#include "trimfit/rng.hpp"

namespace trimfit {

/// Mixture of m linear components in R^d with per-component Gaussian
/// feature covariance.
struct MixtureSpec {
  /// d x m; column j is the component vector theta*_(j).
  Matrix components;
  /// Mixing proportions over all n samples. Positive; a sum below one is
  /// rescaled to one.
  std::vector<double> weights;
  /// Either empty (identity for every component) or one entry per
  /// component; std::nullopt means identity for that component.
  std::vector<std::optional<Matrix>> covariances;

  std::size_t d() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(components.cols()); }

  /// Throws InvalidArgument when an invariant fails.
  void validate() const;

  /// Equal weights, identity covariances.
  static MixtureSpec balanced(Matrix components);
};

enum class Adversary {
  none,
  oblivious_random,    ///< Random index subset, r_i ~ N(0, magnitude^2).
  residual_targeted,   ///< Smallest |y_i| rows pushed onto a phantom component.
  component_targeted,  ///< Phantom corruptions placed on the smallest component.
};

std::string_view to_string(Adversary adversary);
/// Accepts the names printed by to_string; throws InvalidArgument otherwise.
Adversary parse_adversary(std::string_view name);

struct CorruptionSpec {
  /// Corrupted count divided by the smallest component's clean size.
  double gamma_star = 0.0;
  Adversary adversary = Adversary::none;
  double magnitude = 1.0;

  void validate() const;
};

/// Hidden generative state of an MLR-C instance.
struct GroundTruth {
  Matrix theta_star;                   ///< d x m
  std::vector<std::size_t> partition;  ///< component label per sample
  std::vector<bool> corrupted;         ///< the set R*
  Vector r;                            ///< zero outside R*
  std::vector<double> tau_star;        ///< clean fraction per component
  std::uint64_t seed = 0;
  std::string generator{kGeneratorVersion};

  std::size_t n() const { return partition.size(); }
  std::size_t m() const { return static_cast<std::size_t>(theta_star.cols()); }
  std::size_t corrupted_count() const;
  double tau_min() const;
  /// Realized |R*| / (n tau*_min).
  double gamma_star() const;
  /// Indices of uncorrupted samples labelled j.
  IndexSet clean_indices(std::size_t j) const;

};

struct Instance {
  Dataset data;
  GroundTruth truth;
};

/// Number of samples to corrupt: floor(gamma* x smallest clean component size).
std::size_t corruption_count(double gamma_star, std::size_t smallest_component);

/// Draws a seeded MLR-C instance. Sample labels are assigned by largest
/// remainder on the weights, then shuffled; features of component j are
/// N(0, Sigma_j); corruptions are injected with a seed derived from `seed`.
Instance generate_mlrc(const MixtureSpec& spec, const CorruptionSpec& corruption,
                       std::size_t n, std::uint64_t seed);

/// Adds corruptions to an uncorrupted instance. Rows outside R* are copied
/// bitwise.
Instance inject_corruptions(const Dataset& data, const GroundTruth& truth,
                            const CorruptionSpec& corruption, std::uint64_t seed);

/// Unit direction of the phantom component used by the targeted
/// adversaries: (1, ..., 1) / sqrt(d).
Vector phantom_direction(std::size_t d);

/// max_i |y_i - <x_i, theta*_(p_i)> - r_i| / (1 + |y_i|).
double reconstruction_error(const Dataset& data, const GroundTruth& truth);

/// Pretty-printed JSON sidecar with theta_star (column-major list of
/// lists), partition, corrupted, r, tau_star, seed and generator.
std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(std::string_view text);
void write_truth_json(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_truth_json(const std::filesystem::path& path);

}  // namespace trimfit
