#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trimfit/dataset.hpp"
#include "trimfit/model.hpp"

namespace trimfit {

enum class RankPolicy {
  fail,      ///< Rank-deficient X_S raises RankDeficient.
  min_norm,  ///< Minimum-norm minimizer; singular values <= 1e-10 sigma_max dropped.
};

std::string_view to_string(RankPolicy policy);
RankPolicy parse_rank_policy(std::string_view name);

/// Relative singular-value cutoff for rank decisions in least_squares.
inline constexpr double kRankThreshold = 1e-10;

struct IltsConfig {
  double tau = 1.0;              ///< retained fraction, in (0, 1]
  std::size_t max_rounds = 100;  ///< T
  double tol = 1e-10;            ///< stop once ||theta_{t+1} - theta_t|| <= tol
  RankPolicy rank_policy = RankPolicy::fail;

  void validate() const;
};

/// Per-round record of an ILTS or GD-ILTS run.
///
/// Round t maps iterate theta_t through the trimmed set S_t to theta_{t+1}.
/// `iterates` therefore holds rounds_used + 1 vectors, every other list
/// holds rounds_used entries, except `dist_to_nearest`, which is indexed
/// by iterate and is empty when no ground truth was supplied.
struct SolverTrace {
  std::vector<Vector> iterates;
  std::vector<IndexSet> selected_sets;
  std::vector<double> selection_losses;  ///< a(theta_t, S_t)
  std::vector<double> trimmed_losses;    ///< a(theta_{t+1}, S_t)
  std::vector<double> step_norms;
  std::vector<double> dist_to_nearest;
  std::vector<std::size_t> inner_steps;  ///< GD-ILTS only: M_t per round
  std::size_t rounds_used = 0;
  bool converged = false;

  const Vector& final_theta() const { return iterates.back(); }
};

/// floor(tau * n), with a 1e-9 slack so that e.g. 0.4 * 4000 yields 1600.
std::size_t retained_count(double tau, std::size_t n);

/// Sum of squared residuals over `rows`.
double trimmed_loss(const Dataset& data, const Vector& theta, std::span<const std::size_t> rows);

/// Squared residuals (y_i - <x_i, theta>)^2 for every sample.
Vector squared_residuals(const Dataset& data, const Vector& theta);

/// The k samples with smallest squared residual; ties go to the smaller
/// index. Returned in ascending index order.
IndexSet select_trimmed_set(const Dataset& data, const Vector& theta, std::size_t k);

/// Exact least squares on the rows in `rows` via column-pivoted QR.
Vector least_squares(const Dataset& data, std::span<const std::size_t> rows,
                     RankPolicy policy = RankPolicy::fail);

/// Iterative least trimmed squares from `theta0`, retaining floor(tau n)
/// samples per round. Stops when the step norm reaches `tol` or when the
/// trimmed set repeats (the next least-squares step would reproduce the
/// current iterate exactly).
SolverTrace ilts_run(const Dataset& data, const Vector& theta0, const IltsConfig& config,
                     const GroundTruth* truth = nullptr);

/// Same as ilts_run with an explicit retained count instead of tau.
SolverTrace ilts_run_count(const Dataset& data, const Vector& theta0, std::size_t retained,
                           const IltsConfig& config, const GroundTruth* truth = nullptr);

/// ||theta_{t+1} - theta*_(j)|| / ||theta_t - theta*_(j)|| for each round;
/// rounds whose denominator is below 1e-14 are skipped.
std::vector<double> contraction_ratio(const SolverTrace& trace, const GroundTruth& truth,
                                      std::size_t j);

/// min_j ||theta - theta*_(j)||.
double distance_to_nearest(const Vector& theta, const Matrix& theta_star);
/// Index of the nearest column of theta_star (lowest index on ties).
std::size_t nearest_component(const Vector& theta, const Matrix& theta_star);

/// The retained-fraction grid {1, c, c^2, ...} down to (and excluding)
/// values below `smallest`.
std::vector<double> tau_grid(double c = 0.9, double smallest = 1e-3);

/// Trace CSV: round, step_norm, trimmed_loss, dist_to_nearest[, inner_steps].
/// dist_to_nearest is left blank when the run had no ground truth.
void write_trace_csv(std::ostream& out, const SolverTrace& trace);

/// Final theta, rounds_used, converged flag and the configuration echo.
std::string trace_summary_json(const SolverTrace& trace, const IltsConfig& config);

}  // namespace trimfit
