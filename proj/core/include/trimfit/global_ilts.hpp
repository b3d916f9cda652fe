#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trimfit/ilts.hpp"

namespace trimfit {

enum class Provenance { svd, external };

std::string_view to_string(Provenance provenance);

/// Orthonormal d x m_tilde basis of an estimated component span.
struct SubspaceEstimate {
  Matrix basis;
  Provenance provenance = Provenance::svd;

  std::size_t d() const { return static_cast<std::size_t>(basis.rows()); }
  std::size_t m_tilde() const { return static_cast<std::size_t>(basis.cols()); }

  /// Throws InvalidArgument unless 1 <= m_tilde <= d and the columns are
  /// orthonormal within `tolerance` entrywise.
  void validate(double tolerance = 1e-10) const;

  /// Wraps a user-supplied basis (for instance from a robust PCA tool).
  static SubspaceEstimate external(Matrix basis);
};

/// Top-m right singular vectors of L = [y_1 x_1; ...; y_n x_n]. Column
/// signs are fixed so that each column's largest-magnitude entry is
/// positive. Only consistent for uncorrupted data; plug in an external
/// basis otherwise.
SubspaceEstimate estimate_subspace(const Dataset& data, std::size_t m);

/// ||(I - U_hat U_hat^T) U_true||_2, in [0, 1].
double subspace_distance(const SubspaceEstimate& estimate, const Matrix& u_true);

/// Orthonormal basis of the column span of `columns` (thin QR).
Matrix orthonormalize(const Matrix& columns);

/// ceil((3R/eps)^m_tilde), saturated at `cap`.
std::size_t covering_number(double radius, double epsilon, std::size_t m_tilde, std::size_t cap);

/// min(budget, covering_number) points drawn uniformly from the sphere of
/// radius R inside the span of the basis. A one-dimensional sphere has
/// only the two points +-R b, so at most two candidates come back then.
std::vector<Vector> generate_candidates(const SubspaceEstimate& subspace, double radius,
                                        double epsilon, std::size_t budget,
                                        std::uint64_t seed);

struct Acceptance {
  bool accepted = false;
  IndexSet rows;  ///< {i : (y_i - <x_i, theta>)^2 < delta^2}
};

/// Accepts theta when at least floor(tau_j n) residuals are below delta.
Acceptance accept_component(const Dataset& data, const Vector& theta, double tau_j,
                            double delta);
/// Same test against an explicit required count.
Acceptance accept_component_count(const Dataset& data, const Vector& theta,
                                  std::size_t required, double delta);

/// 0.95 nearest-rank quantile of |y_i| / ||x_i|| (zero rows skipped).
double default_radius(const Dataset& data);

/// 10 * target * sqrt(ln n).
double default_delta(double target_accuracy, std::size_t n);

struct Matching {
  double value = 0.0;
  /// permutation[j] is the column of theta_hat matched to theta_star column j.
  std::vector<std::size_t> permutation;
  std::vector<double> errors;
};

/// min over column permutations P of max_j ||(Theta_hat P - Theta*)_j||_2.
/// Exhaustive for m <= 8, bottleneck assignment by threshold bisection
/// otherwise. Non-finite columns count as infinitely far.
Matching epsilon_recovery(const Matrix& theta_hat, const Matrix& theta_star);

struct GlobalConfig {
  std::size_t m = 1;
  /// Retained fraction per component, relative to the full sample count.
  /// May be empty when tau_grid_search is on.
  std::vector<double> tau_list;
  /// Search {1, c, c^2, ...} per component and keep the largest value that
  /// yields an accepted candidate.
  bool tau_grid_search = false;
  double tau_grid_c = 0.9;
  std::optional<double> delta;         ///< default_delta(target_accuracy, n) when unset
  double target_accuracy = 1e-6;
  std::optional<double> radius;        ///< default_radius(data) when unset
  std::size_t candidate_budget = 1000;
  double epsilon_net = 0.5;
  std::uint64_t seed = 0;
  std::size_t ilts_max_rounds = 50;
  double ilts_tol = 1e-10;
  /// Concurrent candidate runs; 0 or 1 is sequential.
  std::size_t threads = 0;

  void validate() const;
};

struct CandidateOutcome {
  std::size_t component = 0;
  std::size_t candidate = 0;
  double tau = 0.0;
  std::size_t rounds = 0;
  bool accepted = false;
  std::size_t accepted_size = 0;
  std::string error;  ///< solver error message, empty on success
};

struct RecoveryReport {
  Matrix theta_hat;  ///< d x m, NaN columns for unrecovered components
  std::vector<bool> recovered;
  std::vector<IndexSet> accepted_sets;  ///< indices into the input dataset
  std::vector<std::size_t> accepted_counts;
  std::vector<std::size_t> candidates_tried;
  std::vector<double> tau_used;
  std::vector<CandidateOutcome> outcomes;
  bool partial = false;        ///< some component exhausted its budget
  bool total_failure = false;  ///< every component did
  double delta = 0.0;
  double radius = 0.0;
  bool radius_heuristic = false;
  SubspaceEstimate subspace;
  std::optional<Matching> matching;  ///< only with ground truth

  std::optional<double> epsilon_recovery_value() const {
    return matching ? std::optional<double>(matching->value) : std::nullopt;
  }
};

/// Recovers all components: candidates from a sphere in the subspace,
/// ILTS from each, residual-threshold acceptance, removal of the accepted
/// samples before the next component. Candidate runs may execute
/// concurrently; the accepted candidate is always the lowest-index one
/// that passes.
RecoveryReport global_ilts(const Dataset& data, const GlobalConfig& config,
                           const SubspaceEstimate* subspace = nullptr,
                           const GroundTruth* truth = nullptr);

std::string report_to_json(const RecoveryReport& report, const GlobalConfig& config);

/// component, candidate, tau, rounds, accepted, accepted_size, error
void write_candidates_csv(std::ostream& out, const RecoveryReport& report);

}  // namespace trimfit
