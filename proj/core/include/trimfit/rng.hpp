#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace trimfit {

/// Name and version of the pseudo-random stream. Recorded in every output
/// that depends on a seed; bump the suffix whenever the draw order changes.
inline constexpr std::string_view kGeneratorVersion = "mt19937_64+polar-normal/v1";

/// splitmix64 finalizer, used to derive independent sub-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded random stream with platform-independent draws.
///
/// std::mt19937_64 is bit-exact across standard libraries, but the
/// <random> distributions are not, so all derived draws are implemented
/// here on top of the raw 64-bit output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::size_t uniform_index(std::size_t bound);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace trimfit
