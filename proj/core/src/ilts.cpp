#include "trimfit/ilts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "trimfit/error.hpp"

namespace trimfit {

std::string_view to_string(RankPolicy policy) {
  return policy == RankPolicy::fail ? "fail" : "min-norm";
}

RankPolicy parse_rank_policy(std::string_view name) {
  if (name == "fail") return RankPolicy::fail;
  if (name == "min-norm") return RankPolicy::min_norm;
  throw InvalidArgument("unknown rank policy '" + std::string(name) + "'");
}

void IltsConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("ilts: tau must lie in (0, 1]");
  if (max_rounds < 1) throw InvalidArgument("ilts: max_rounds must be positive");
  if (!(tol >= 0.0)) throw InvalidArgument("ilts: tol must be nonnegative");
}

std::size_t retained_count(double tau, std::size_t n) {
  return static_cast<std::size_t>(std::floor(tau * static_cast<double>(n) + 1e-9));
}

Vector squared_residuals(const Dataset& data, const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != data.d()) {
    throw InvalidArgument("theta has dimension " + std::to_string(theta.size()) +
                          ", dataset has d = " + std::to_string(data.d()));
  }
  return (data.y() - data.X() * theta).array().square().matrix();
}

double trimmed_loss(const Dataset& data, const Vector& theta, std::span<const std::size_t> rows) {
  double loss = 0.0;
  for (std::size_t i : rows) {
    const auto r = static_cast<Eigen::Index>(i);
    const double e = data.y()(r) - data.X().row(r).dot(theta);
    loss += e * e;
  }
  return loss;
}

IndexSet select_trimmed_set(const Dataset& data, const Vector& theta, std::size_t k) {
  const std::size_t n = data.n();
  if (k < 1 || k > n) {
    throw InvalidArgument("select: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
  }
  const Vector res = squared_residuals(data, theta);
  if (!res.allFinite()) throw InvalidArgument("select: non-finite residual");
  IndexSet order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&res](std::size_t a, std::size_t b) {
    const double ra = res(static_cast<Eigen::Index>(a));
    const double rb = res(static_cast<Eigen::Index>(b));
    return ra < rb || (ra == rb && a < b);
  };
  if (k < n) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.end(), before);
    order.resize(k);
  }
  std::sort(order.begin(), order.end());
  return order;
}

Vector least_squares(const Dataset& data, std::span<const std::size_t> rows, RankPolicy policy) {
  if (rows.empty()) throw InvalidArgument("least squares: empty sample set");
  const auto d = static_cast<Eigen::Index>(data.d());
  const auto k = static_cast<Eigen::Index>(rows.size());
  Matrix Xs(k, d);
  Vector ys(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    Xs.row(r) = data.X().row(i);
    ys(r) = data.y()(i);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(Xs);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() == d) return qr.solve(ys);
  if (policy == RankPolicy::fail) {
    throw RankDeficient("least squares: X_S has rank " + std::to_string(qr.rank()) +
                        " < d = " + std::to_string(d) + " on " + std::to_string(k) +
                        " samples");
  }
  Eigen::JacobiSVD<Matrix> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kRankThreshold);
  return svd.solve(ys);
}

double distance_to_nearest(const Vector& theta, const Matrix& theta_star) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < theta_star.cols(); ++j) {
    best = std::min(best, (theta - theta_star.col(j)).norm());
  }
  return best;
}

std::size_t nearest_component(const Vector& theta, const Matrix& theta_star) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < theta_star.cols(); ++j) {
    const double dist = (theta - theta_star.col(j)).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<std::size_t>(j);
    }
  }
  return best;
}

SolverTrace ilts_run(const Dataset& data, const Vector& theta0, const IltsConfig& config,
                     const GroundTruth* truth) {
  config.validate();
  return ilts_run_count(data, theta0, retained_count(config.tau, data.n()), config, truth);
}

SolverTrace ilts_run_count(const Dataset& data, const Vector& theta0, std::size_t retained,
                           const IltsConfig& config, const GroundTruth* truth) {
  if (config.max_rounds < 1) throw InvalidArgument("ilts: max_rounds must be positive");
  if (!(config.tol >= 0.0)) throw InvalidArgument("ilts: tol must be nonnegative");
  if (static_cast<std::size_t>(theta0.size()) != data.d() || !theta0.allFinite()) {
    throw InvalidArgument("ilts: theta0 must be a finite vector of dimension d");
  }
  if (retained < 1 || retained > data.n()) {
    throw InvalidArgument("ilts: retained count " + std::to_string(retained) +
                          " outside [1, n]");
  }
  if (config.rank_policy == RankPolicy::fail && retained < data.d()) {
    throw RankDeficient("ilts: retained count " + std::to_string(retained) +
                        " is below d = " + std::to_string(data.d()));
  }
  if (truth != nullptr && static_cast<std::size_t>(truth->theta_star.rows()) != data.d()) {
    throw InvalidArgument("ilts: ground truth dimension does not match the dataset");
  }

  SolverTrace trace;
  Vector theta = theta0;
  trace.iterates.push_back(theta);
  if (truth) trace.dist_to_nearest.push_back(distance_to_nearest(theta, truth->theta_star));

  IndexSet selected = select_trimmed_set(data, theta, retained);
  for (std::size_t round = 0; round < config.max_rounds; ++round) {
    const double selection_loss = trimmed_loss(data, theta, selected);
    Vector next = least_squares(data, selected, config.rank_policy);
    const double fitted_loss = trimmed_loss(data, next, selected);
    const double step = (next - theta).norm();

    trace.selected_sets.push_back(selected);
    trace.selection_losses.push_back(selection_loss);
    trace.trimmed_losses.push_back(fitted_loss);
    trace.step_norms.push_back(step);
    trace.iterates.push_back(next);
    if (truth) trace.dist_to_nearest.push_back(distance_to_nearest(next, truth->theta_star));
    trace.rounds_used = round + 1;
    theta = std::move(next);

    if (step <= config.tol) {
      trace.converged = true;
      break;
    }
    IndexSet reselected = select_trimmed_set(data, theta, retained);
    if (reselected == selected) {
      trace.converged = true;
      break;
    }
    selected = std::move(reselected);
  }
  return trace;
}

std::vector<double> contraction_ratio(const SolverTrace& trace, const GroundTruth& truth,
                                      std::size_t j) {
  if (j >= truth.m()) throw InvalidArgument("contraction ratio: component out of range");
  std::vector<double> ratios;
  const Vector target = truth.theta_star.col(static_cast<Eigen::Index>(j));
  for (std::size_t t = 0; t + 1 < trace.iterates.size(); ++t) {
    const double before = (trace.iterates[t] - target).norm();
    if (before < 1e-14) continue;
    ratios.push_back((trace.iterates[t + 1] - target).norm() / before);
  }
  return ratios;
}

std::vector<double> tau_grid(double c, double smallest) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("tau grid: c must lie in (0, 1)");
  if (!(smallest > 0.0)) throw InvalidArgument("tau grid: smallest must be positive");
  std::vector<double> grid;
  for (double tau = 1.0; tau >= smallest; tau *= c) grid.push_back(tau);
  return grid;
}

void write_trace_csv(std::ostream& out, const SolverTrace& trace) {
  const bool has_dist = !trace.dist_to_nearest.empty();
  const bool has_inner = !trace.inner_steps.empty();
  out << "round,step_norm,trimmed_loss,dist_to_nearest";
  if (has_inner) out << ",inner_steps";
  out << '\n';
  for (std::size_t t = 0; t < trace.rounds_used; ++t) {
    out << (t + 1) << ',' << format_double(trace.step_norms[t]) << ','
        << format_double(trace.trimmed_losses[t]) << ',';
    if (has_dist) out << format_double(trace.dist_to_nearest[t + 1]);
    if (has_inner) out << ',' << trace.inner_steps[t];
    out << '\n';
  }
}

std::string trace_summary_json(const SolverTrace& trace, const IltsConfig& config) {
  nlohmann::ordered_json j;
  j["format"] = "trimfit-trace-summary";
  j["version"] = 1;
  j["solver"] = "ilts";
  const Vector& theta = trace.final_theta();
  j["final_theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  j["rounds_used"] = trace.rounds_used;
  j["converged"] = trace.converged;
  if (!trace.dist_to_nearest.empty()) j["final_dist_to_nearest"] = trace.dist_to_nearest.back();
  j["config"] = {{"tau", config.tau},
                 {"max_rounds", config.max_rounds},
                 {"tol", config.tol},
                 {"rank_policy", std::string(to_string(config.rank_policy))}};
  return j.dump(2) + "\n";
}

}  // namespace trimfit
