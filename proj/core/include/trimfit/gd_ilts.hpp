#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "trimfit/ilts.hpp"

namespace trimfit {

enum class Schedule {
  fixed,     ///< M_t = fixed_steps every round
  adaptive,  ///< M_t = stopping_steps(lambda_t, w)
};

std::string_view to_string(Schedule schedule);
Schedule parse_schedule(std::string_view name);

/// Configuration of the gradient variant of ILTS.
///
/// The proportionality constant c_u of the ideal stopping time is exposed
/// as `c_u`. The remainder term omega(u) and the constants of nu(u) in the
/// contraction bound are not computed at run time.
struct GdConfig {
  double tau = 1.0;
  std::size_t max_rounds = 100;
  double tol = 1e-10;
  /// Step size. std::nullopt selects 1 / L_hat per round, with L_hat from
  /// power iteration on (1/|S|) X_S^T X_S.
  std::optional<double> eta;
  Schedule schedule = Schedule::fixed;
  std::size_t fixed_steps = 10;   ///< M for the fixed schedule
  double w = 10.0;                ///< relative cost of one ranking step
  double c_u = 1.0;
  std::size_t max_inner_steps = 100000;

  void validate() const;
};

/// Number of power-iteration sweeps used by estimate_lipschitz.
inline constexpr std::size_t kPowerIterations = 20;

/// Largest eigenvalue of (1/|S|) X_S^T X_S by power iteration.
double estimate_lipschitz(const Dataset& data, std::span<const std::size_t> rows,
                          std::size_t iterations = kPowerIterations);

/// Exactly M gradient steps on (1/(2|S|)) sum_{i in S} (y_i - <x_i, theta>)^2.
/// Throws Diverged once ||theta|| exceeds 1e8 (1 + ||theta_start||).
Vector gd_inner_loop(const Dataset& data, std::span<const std::size_t> rows,
                     const Vector& theta_start, double eta, std::size_t steps);

/// u = max(1, ceil(c_u ln(w / (lambda ln(1/lambda))))). lambda must lie in (0, 1).
std::size_t stopping_steps(double lambda, double w, double c_u = 1.0);

/// Run-time error proxy: max(||theta - reference|| / ||reference||, ln n / n),
/// clamped to at most 1/e, where stopping_steps is smallest. A zero
/// reference yields 1/e.
double runtime_lambda(const Vector& theta, const Vector& reference, std::size_t n);

/// Post-hoc error measure against the true component:
/// max(||theta - theta*|| / ||theta*||, ln n / n).
double true_lambda(const Vector& theta, const Vector& theta_star, std::size_t n);

/// ILTS with the least-squares half-step replaced by gd_inner_loop. The
/// first round uses lambda = 1/e. The trace additionally fills inner_steps.
SolverTrace gd_ilts_run(const Dataset& data, const Vector& theta0, const GdConfig& config,
                        const GroundTruth* truth = nullptr);

std::string trace_summary_json(const SolverTrace& trace, const GdConfig& config);

}  // namespace trimfit
