#include "trimfit/gd_ilts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "trimfit/error.hpp"

namespace trimfit {

namespace {

struct Subproblem {
  Matrix X;
  Vector y;
};

Subproblem gather(const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw InvalidArgument("gd: empty sample set");
  const auto k = static_cast<Eigen::Index>(rows.size());
  Subproblem sub{Matrix(k, static_cast<Eigen::Index>(data.d())), Vector(k)};
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    if (rows[static_cast<std::size_t>(r)] >= data.n()) {
      throw InvalidArgument("gd: row index out of range");
    }
    sub.X.row(r) = data.X().row(i);
    sub.y(r) = data.y()(i);
  }
  return sub;
}

double lipschitz(const Matrix& X, std::size_t iterations) {
  const double scale = 1.0 / static_cast<double>(X.rows());
  Vector v = Vector::Ones(X.cols()).normalized();
  double estimate = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    Vector next = scale * (X.transpose() * (X * v));
    estimate = next.norm();
    if (estimate == 0.0) return 0.0;
    v = next / estimate;
  }
  return estimate;
}

}  // namespace

std::string_view to_string(Schedule schedule) {
  return schedule == Schedule::fixed ? "fixed" : "adaptive";
}

Schedule parse_schedule(std::string_view name) {
  if (name == "fixed") return Schedule::fixed;
  if (name == "adaptive") return Schedule::adaptive;
  throw InvalidArgument("unknown schedule '" + std::string(name) + "'");
}

void GdConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("gd: tau must lie in (0, 1]");
  if (max_rounds < 1) throw InvalidArgument("gd: max_rounds must be positive");
  if (!(tol >= 0.0)) throw InvalidArgument("gd: tol must be nonnegative");
  if (eta && !(*eta > 0.0 && std::isfinite(*eta))) {
    throw InvalidArgument("gd: eta must be positive");
  }
  if (schedule == Schedule::fixed && fixed_steps < 1) {
    throw InvalidArgument("gd: fixed schedule needs M >= 1");
  }
  if (schedule == Schedule::adaptive && !(w > 0.0)) {
    throw InvalidArgument("gd: adaptive schedule needs w > 0");
  }
  if (!(c_u > 0.0)) throw InvalidArgument("gd: c_u must be positive");
  if (max_inner_steps < 1) throw InvalidArgument("gd: max_inner_steps must be positive");
}

double estimate_lipschitz(const Dataset& data, std::span<const std::size_t> rows,
                          std::size_t iterations) {
  return lipschitz(gather(data, rows).X, iterations);
}

Vector gd_inner_loop(const Dataset& data, std::span<const std::size_t> rows,
                     const Vector& theta_start, double eta, std::size_t steps) {
  if (steps < 1) throw InvalidArgument("gd: step count must be at least 1");
  if (!(eta > 0.0)) throw InvalidArgument("gd: eta must be positive");
  if (static_cast<std::size_t>(theta_start.size()) != data.d()) {
    throw InvalidArgument("gd: theta has the wrong dimension");
  }
  const Subproblem sub = gather(data, rows);
  const double scale = eta / static_cast<double>(sub.X.rows());
  const double limit = 1e8 * (1.0 + theta_start.norm());
  Vector theta = theta_start;
  for (std::size_t s = 0; s < steps; ++s) {
    theta -= scale * (sub.X.transpose() * (sub.X * theta - sub.y));
    const double norm = theta.norm();
    if (!(norm <= limit)) {
      throw Diverged("gd: iterate norm left the bound " + format_double(limit) +
                     " after " + std::to_string(s + 1) + " steps");
    }
  }
  return theta;
}

std::size_t stopping_steps(double lambda, double w, double c_u) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw InvalidArgument("stopping steps: lambda must lie in (0, 1)");
  }
  if (!(w > 0.0)) throw InvalidArgument("stopping steps: w must be positive");
  if (!(c_u > 0.0)) throw InvalidArgument("stopping steps: c_u must be positive");
  const double u = std::ceil(c_u * std::log(w / (lambda * std::log(1.0 / lambda))));
  if (!(u > 1.0)) return 1;
  return static_cast<std::size_t>(u);
}

namespace {

double log_floor(std::size_t n) {
  const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
  return std::max(std::log(nn) / nn, 1e-12);
}

}  // namespace

double runtime_lambda(const Vector& theta, const Vector& reference, std::size_t n) {
  constexpr double kCap = 1.0 / std::numbers::e;
  const double ref_norm = reference.norm();
  if (ref_norm == 0.0) return kCap;
  const double lambda = std::max((theta - reference).norm() / ref_norm, log_floor(n));
  return std::min(lambda, kCap);
}

double true_lambda(const Vector& theta, const Vector& theta_star, std::size_t n) {
  const double norm = theta_star.norm();
  if (norm == 0.0) throw InvalidArgument("true lambda: zero component");
  return std::max((theta - theta_star).norm() / norm, log_floor(n));
}

SolverTrace gd_ilts_run(const Dataset& data, const Vector& theta0, const GdConfig& config,
                        const GroundTruth* truth) {
  config.validate();
  if (static_cast<std::size_t>(theta0.size()) != data.d() || !theta0.allFinite()) {
    throw InvalidArgument("gd: theta0 must be a finite vector of dimension d");
  }
  const std::size_t retained = retained_count(config.tau, data.n());
  if (retained < 1) throw InvalidArgument("gd: tau n rounds down to zero samples");

  SolverTrace trace;
  Vector theta = theta0;
  trace.iterates.push_back(theta);
  if (truth) trace.dist_to_nearest.push_back(distance_to_nearest(theta, truth->theta_star));

  for (std::size_t round = 0; round < config.max_rounds; ++round) {
    IndexSet selected = select_trimmed_set(data, theta, retained);
    const Subproblem sub = gather(data, selected);
    const double eta = config.eta ? *config.eta : 1.0 / lipschitz(sub.X, kPowerIterations);
    if (!std::isfinite(eta)) throw Diverged("gd: selected design is zero; no step size");

    std::size_t steps = config.fixed_steps;
    if (config.schedule == Schedule::adaptive) {
      const double lambda = round == 0 ? 1.0 / std::numbers::e
                                       : runtime_lambda(theta, trace.iterates[round - 1],
                                                        data.n());
      steps = std::min(stopping_steps(lambda, config.w, config.c_u), config.max_inner_steps);
    }

    const double selection_loss = trimmed_loss(data, theta, selected);
    Vector next = gd_inner_loop(data, selected, theta, eta, steps);
    const double fitted_loss = trimmed_loss(data, next, selected);
    const double step = (next - theta).norm();

    trace.selected_sets.push_back(std::move(selected));
    trace.selection_losses.push_back(selection_loss);
    trace.trimmed_losses.push_back(fitted_loss);
    trace.step_norms.push_back(step);
    trace.inner_steps.push_back(steps);
    trace.iterates.push_back(next);
    if (truth) trace.dist_to_nearest.push_back(distance_to_nearest(next, truth->theta_star));
    trace.rounds_used = round + 1;
    theta = std::move(next);
    if (step <= config.tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

std::string trace_summary_json(const SolverTrace& trace, const GdConfig& config) {
  nlohmann::ordered_json j;
  j["format"] = "trimfit-trace-summary";
  j["version"] = 1;
  j["solver"] = "gd-ilts";
  const Vector& theta = trace.final_theta();
  j["final_theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  j["rounds_used"] = trace.rounds_used;
  j["converged"] = trace.converged;
  if (!trace.dist_to_nearest.empty()) j["final_dist_to_nearest"] = trace.dist_to_nearest.back();
  j["inner_steps"] = trace.inner_steps;
  nlohmann::ordered_json cfg;
  cfg["tau"] = config.tau;
  cfg["max_rounds"] = config.max_rounds;
  cfg["tol"] = config.tol;
  if (config.eta) {
    cfg["eta"] = *config.eta;
  } else {
    cfg["eta"] = "1/L_hat";
  }
  cfg["schedule"] = std::string(to_string(config.schedule));
  cfg["fixed_steps"] = config.fixed_steps;
  cfg["w"] = config.w;
  cfg["c_u"] = config.c_u;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

}  // namespace trimfit
