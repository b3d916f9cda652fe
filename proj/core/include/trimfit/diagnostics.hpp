#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "trimfit/ilts.hpp"
#include "trimfit/model.hpp"

namespace trimfit {

struct QSeparation {
  double q = 0.0;            ///< min pairwise distance / max norm
  std::vector<double> q_j;   ///< min distance from j to the rest / ||theta*_(j)||
};

/// Global and per-component separation of the columns of theta_star.
QSeparation q_separation(const Matrix& theta_star);

enum class EstimateMode { exact, sampled };
std::string_view to_string(EstimateMode mode);

/// Largest number of subsets feature_regularity_exact will enumerate.
inline constexpr std::uint64_t kExactSubsetBudget = 2'000'000;

/// C(n, k), saturated at `cap` + 1.
std::uint64_t binomial(std::size_t n, std::size_t k, std::uint64_t cap = kExactSubsetBudget);

/// Extreme eigenvalues of X_S^T X_S over size-k row subsets.
///
/// In exact mode these are the true psi+(k) and psi-(k). In sampled mode
/// they are inner bounds: psi_plus never exceeds the true maximum and
/// psi_minus never falls below the true minimum.
struct RegularityEstimate {
  std::size_t k = 0;
  double psi_plus = 0.0;
  double psi_minus = 0.0;
  EstimateMode mode = EstimateMode::exact;
  std::size_t trials = 0;
  std::uint64_t subsets_evaluated = 0;
};

/// (lambda_min, lambda_max) of X_S^T X_S; lambda_min is clamped at zero.
std::pair<double, double> gram_extremes(const Matrix& X, std::span<const std::size_t> rows);

/// Enumerates all C(n, k) subsets. Throws BudgetExceeded above kExactSubsetBudget.
RegularityEstimate feature_regularity_exact(const Matrix& X, std::size_t k);

/// `trials` uniform random k-subsets, plus the k rows of largest and of
/// smallest leverage, plus any caller-supplied subsets of size k. When
/// trials >= C(n, k) every subset is visited once instead.
RegularityEstimate feature_regularity_sampled(const Matrix& X, std::size_t k, std::size_t trials,
                                              std::uint64_t seed,
                                              std::span<const IndexSet> extra_subsets = {});

/// Label for rows that belong to no clean component (corrupted samples).
inline constexpr std::size_t kExcludedLabel = std::numeric_limits<std::size_t>::max();

/// Partition with corrupted rows relabelled kExcludedLabel.
std::vector<std::size_t> clean_labels(const GroundTruth& truth);

/// Unit directions (u1, u2); v1 = delta * u1 and v2 = u2 give the ratio delta.
struct DirectionPair {
  Vector u1;
  Vector u2;
};

struct AffineErrorEstimate {
  double delta = 0.0;
  std::size_t j = 0;
  std::size_t value = 0;  ///< lower bound on V(delta): max over the pool
  std::size_t directions_tried = 0;
  EstimateMode mode = EstimateMode::sampled;
};

/// Largest V with
///   [|X_(j) v1|]_(V + ceil((tau*_j - tau_j) n))-th largest
///     >= [|X_(-j) v2|]_(V)-th smallest,
/// or 0 when V = 1 already fails. tau*_j is |{i : labels_i = j}| / n.
std::size_t affine_error_for_pair(const Matrix& X, std::span<const std::size_t> labels,
                                  std::size_t j, double tau_j, double delta,
                                  const DirectionPair& pair);

/// Max of affine_error_for_pair over `directions` seeded uniform pairs and
/// any `informed` pairs. The seeded pool does not depend on delta, so the
/// estimate is non-decreasing in delta for fixed (seed, directions).
AffineErrorEstimate affine_error_estimate(const Matrix& X, std::span<const std::size_t> labels,
                                          std::span<const double> tau, std::size_t j,
                                          double delta, std::size_t directions,
                                          std::uint64_t seed,
                                          std::span<const DirectionPair> informed = {});

/// 2 psi+ / psi-: the one-step contraction factor of ILTS for supplied
/// regularity values. A value of 2 or more is vacuous.
double contraction_bound(double psi_plus, double psi_minus);

/// (1/Q_j) * 2 ||theta - theta*_(j)|| / ||theta*_(j)||, the ratio at which
/// the affine error enters the contraction bound.
double contraction_delta(const Vector& theta, const Matrix& theta_star, std::size_t j);

/// Inflation applied to sampled psi+ values in contraction_bound_check, since a
/// sampled maximum can only underestimate the true one.
inline constexpr double kPsiPlusInflation = 2.0;

struct ContractionCheckOptions {
  std::size_t directions = 64;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
};

struct ContractionCheckRound {
  std::size_t round = 0;
  double observed = 0.0;  ///< ||theta_{t+1} - theta*|| / ||theta_t - theta*||
  double delta = 0.0;
  std::size_t affine_error = 0;
  std::size_t psi_argument = 0;  ///< min(V + |R*|, n)
  double psi_plus = 0.0;
  double psi_minus = 0.0;
  bool psi_plus_exact = false;
  bool psi_minus_exact = false;
  double bound = 0.0;
  bool holds = true;
};

/// Assembles the contraction bound for every round of `trace` whose
/// iterate lies within half the minimum separation of component j, and
/// compares it with the observed ratio. Affine errors use seeded and
/// informed directions (u1 along theta*_(j) - theta_t, u2 along
/// theta*_(l) - theta_t); psi- is searched over random subsets and the
/// trace's own selected sets; sampled psi+ values are inflated by
/// kPsiPlusInflation.
std::vector<ContractionCheckRound> contraction_bound_check(
    const Dataset& data, const GroundTruth& truth, const SolverTrace& trace, std::size_t j,
    double tau, const ContractionCheckOptions& options = {});

}  // namespace trimfit
