#include "trimfit/global_ilts.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "trimfit/error.hpp"
#include "trimfit/parallel.hpp"
#include "trimfit/rng.hpp"

namespace trimfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_orthonormal(const Matrix& basis, double tolerance, const char* what) {
  const auto k = basis.cols();
  const Matrix gram = basis.transpose() * basis;
  if (!gram.allFinite() ||
      (gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > tolerance) {
    throw InvalidArgument(std::string(what) + ": columns are not orthonormal");
  }
}

// Largest-magnitude entry of each column made positive (first one on ties).
void canonicalize_signs(Matrix& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) = -basis.col(c);
  }
}

// Kuhn's augmenting-path matching restricted to edges with cost <= limit.
bool perfect_matching(const Matrix& cost, double limit, std::vector<std::size_t>& match_of_true) {
  const auto m = static_cast<std::size_t>(cost.rows());
  std::vector<std::ptrdiff_t> owner(m, -1);  // hat column -> true column
  std::function<bool(std::size_t, std::vector<bool>&)> augment =
      [&](std::size_t t, std::vector<bool>& seen) {
        for (std::size_t h = 0; h < m; ++h) {
          if (seen[h] || !(cost(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(h)) <= limit)) {
            continue;
          }
          seen[h] = true;
          if (owner[h] < 0 || augment(static_cast<std::size_t>(owner[h]), seen)) {
            owner[h] = static_cast<std::ptrdiff_t>(t);
            return true;
          }
        }
        return false;
      };
  for (std::size_t t = 0; t < m; ++t) {
    std::vector<bool> seen(m, false);
    if (!augment(t, seen)) return false;
  }
  match_of_true.assign(m, 0);
  for (std::size_t h = 0; h < m; ++h) match_of_true[static_cast<std::size_t>(owner[h])] = h;
  return true;
}

}  // namespace

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::svd ? "svd" : "external";
}

void SubspaceEstimate::validate(double tolerance) const {
  if (basis.cols() < 1 || basis.cols() > basis.rows()) {
    throw InvalidArgument("subspace: need 1 <= m_tilde <= d");
  }
  check_orthonormal(basis, tolerance, "subspace");
}

SubspaceEstimate SubspaceEstimate::external(Matrix basis) {
  SubspaceEstimate estimate{std::move(basis), Provenance::external};
  estimate.validate(1e-8);
  return estimate;
}

SubspaceEstimate estimate_subspace(const Dataset& data, std::size_t m) {
  if (m < 1 || m > std::min(data.n(), data.d())) {
    throw InvalidArgument("subspace: m = " + std::to_string(m) + " outside [1, min(n, d)]");
  }
  const Matrix L = data.y().asDiagonal() * data.X();
  if (L.cwiseAbs().maxCoeff() == 0.0) {
    throw InvalidArgument("subspace: degenerate L (all responses or features are zero)");
  }
  Eigen::BDCSVD<Matrix> svd(L, Eigen::ComputeThinV);
  Matrix basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(m));
  canonicalize_signs(basis);
  return SubspaceEstimate{std::move(basis), Provenance::svd};
}

double subspace_distance(const SubspaceEstimate& estimate, const Matrix& u_true) {
  if (estimate.basis.rows() != u_true.rows()) {
    throw InvalidArgument("subspace distance: ambient dimensions differ");
  }
  check_orthonormal(estimate.basis, 1e-8, "subspace distance (estimate)");
  check_orthonormal(u_true, 1e-8, "subspace distance (reference)");
  const Matrix& B = estimate.basis;
  const Matrix residual = u_true - B * (B.transpose() * u_true);
  Eigen::JacobiSVD<Matrix> svd(residual);
  const double sigma = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  return std::clamp(sigma, 0.0, 1.0);
}

Matrix orthonormalize(const Matrix& columns) {
  Eigen::HouseholderQR<Matrix> qr(columns);
  Matrix q = qr.householderQ() * Matrix::Identity(columns.rows(), columns.cols());
  return q;
}

std::size_t covering_number(double radius, double epsilon, std::size_t m_tilde, std::size_t cap) {
  const double count = std::ceil(std::pow(3.0 * radius / epsilon, static_cast<double>(m_tilde)));
  if (!(count < static_cast<double>(cap))) return cap;
  return static_cast<std::size_t>(std::max(count, 1.0));
}

std::vector<Vector> generate_candidates(const SubspaceEstimate& subspace, double radius,
                                        double epsilon, std::size_t budget,
                                        std::uint64_t seed) {
  if (!(radius > 0.0)) throw InvalidArgument("candidates: radius must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("candidates: epsilon must be positive");
  if (budget < 1) throw InvalidArgument("candidates: budget must be at least 1");
  try {
    subspace.validate(1e-8);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("candidates: degenerate subspace (") + e.what() + ")");
  }
  const std::size_t mt = subspace.m_tilde();
  const std::size_t count = covering_number(radius, epsilon, mt, budget);
  std::vector<Vector> out;
  if (mt == 1) {
    const Vector b = subspace.basis.col(0);
    out.push_back(radius * b);
    if (count > 1) out.push_back(-radius * b);
    return out;
  }
  Rng rng(seed);
  out.reserve(count);
  Vector g(static_cast<Eigen::Index>(mt));
  while (out.size() < count) {
    for (Eigen::Index c = 0; c < g.size(); ++c) g(c) = rng.normal();
    const double norm = g.norm();
    if (norm == 0.0) continue;
    out.push_back(radius * (subspace.basis * (g / norm)));
  }
  return out;
}

Acceptance accept_component_count(const Dataset& data, const Vector& theta,
                                  std::size_t required, double delta) {
  const Vector res = squared_residuals(data, theta);
  const double threshold = delta * delta;
  Acceptance out;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (res(static_cast<Eigen::Index>(i)) < threshold) out.rows.push_back(i);
  }
  out.accepted = out.rows.size() >= required;
  return out;
}

Acceptance accept_component(const Dataset& data, const Vector& theta, double tau_j,
                            double delta) {
  return accept_component_count(data, theta, retained_count(tau_j, data.n()), delta);
}

double default_radius(const Dataset& data) {
  std::vector<double> ratios;
  ratios.reserve(data.n());
  for (Eigen::Index i = 0; i < data.X().rows(); ++i) {
    const double norm = data.X().row(i).norm();
    if (norm > 0.0) ratios.push_back(std::abs(data.y()(i)) / norm);
  }
  if (ratios.empty()) throw InvalidArgument("radius: every feature row is zero");
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ratios.size())));
  const std::size_t idx = std::clamp<std::size_t>(rank, 1, ratios.size()) - 1;
  std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(idx),
                   ratios.end());
  const double r = ratios[idx];
  if (!(r > 0.0)) throw InvalidArgument("radius: quantile heuristic gave zero");
  return r;
}

double default_delta(double target_accuracy, std::size_t n) {
  return 10.0 * target_accuracy * std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(n, 2))));
}

Matching epsilon_recovery(const Matrix& theta_hat, const Matrix& theta_star) {
  if (theta_hat.rows() != theta_star.rows() || theta_hat.cols() != theta_star.cols()) {
    throw InvalidArgument("epsilon recovery: shape mismatch");
  }
  const auto m = static_cast<std::size_t>(theta_star.cols());
  Matrix cost(theta_star.cols(), theta_star.cols());  // (true j, hat h)
  for (Eigen::Index j = 0; j < cost.rows(); ++j) {
    for (Eigen::Index h = 0; h < cost.cols(); ++h) {
      const double dist = (theta_hat.col(h) - theta_star.col(j)).norm();
      cost(j, h) = std::isfinite(dist) ? dist : kInf;
    }
  }
  Matching best;
  best.value = kInf;
  if (m == 0) {
    best.value = 0.0;
    return best;
  }
  if (m <= 8) {
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    bool first = true;
    do {
      double worst = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        worst = std::max(worst, cost(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(perm[j])));
      }
      if (first || worst < best.value) {
        best.value = worst;
        best.permutation = perm;
        first = false;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<double> levels(cost.data(), cost.data() + cost.size());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::size_t lo = 0;
    std::size_t hi = levels.size() - 1;
    std::vector<std::size_t> match;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (perfect_matching(cost, levels[mid], match)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    perfect_matching(cost, levels[lo], best.permutation);
    best.value = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      best.value = std::max(best.value, cost(static_cast<Eigen::Index>(j),
                                             static_cast<Eigen::Index>(best.permutation[j])));
    }
  }
  best.errors.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    best.errors[j] = cost(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(best.permutation[j]));
  }
  return best;
}

void GlobalConfig::validate() const {
  if (m < 1) throw InvalidArgument("global: m must be positive");
  if (!tau_grid_search && tau_list.size() != m) {
    throw InvalidArgument("global: tau_list needs " + std::to_string(m) + " entries");
  }
  if (!tau_list.empty() && tau_list.size() != m) {
    throw InvalidArgument("global: tau_list needs " + std::to_string(m) + " entries");
  }
  for (double tau : tau_list) {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("global: every tau_j must lie in (0, 1)");
  }
  if (tau_grid_search && !(tau_grid_c > 0.0 && tau_grid_c < 1.0)) {
    throw InvalidArgument("global: tau_grid_c must lie in (0, 1)");
  }
  if (delta && !(*delta > 0.0)) throw InvalidArgument("global: delta must be positive");
  if (!(target_accuracy > 0.0)) throw InvalidArgument("global: target_accuracy must be positive");
  if (radius && !(*radius > 0.0)) throw InvalidArgument("global: radius must be positive");
  if (candidate_budget < 1) throw InvalidArgument("global: candidate_budget must be at least 1");
  if (!(epsilon_net > 0.0)) throw InvalidArgument("global: epsilon_net must be positive");
  if (ilts_max_rounds < 1) throw InvalidArgument("global: ilts_max_rounds must be positive");
}

namespace {

struct CandidateRun {
  Vector theta;
  std::size_t rounds = 0;
  Acceptance acceptance;
  std::string error;
};

// Runs candidates in batches and returns the index of the first acceptor,
// or candidates.size() when none passes. Outcomes up to that index are
// appended in candidate order.
std::size_t search_candidates(const Dataset& work, const std::vector<Vector>& candidates,
                              std::size_t required, double delta, const GlobalConfig& config,
                              std::size_t component, double tau,
                              std::vector<CandidateOutcome>& outcomes, CandidateRun& winner) {
  IltsConfig ilts;
  ilts.max_rounds = config.ilts_max_rounds;
  ilts.tol = config.ilts_tol;
  ilts.rank_policy = RankPolicy::fail;
  const std::size_t batch = std::max<std::size_t>(config.threads, 1);
  for (std::size_t start = 0; start < candidates.size(); start += batch) {
    const std::size_t stop = std::min(candidates.size(), start + batch);
    std::vector<CandidateRun> runs(stop - start);
    parallel_for(runs.size(), config.threads, [&](std::size_t k) {
      CandidateRun& run = runs[k];
      try {
        auto trace = ilts_run_count(work, candidates[start + k], required, ilts);
        run.rounds = trace.rounds_used;
        run.theta = trace.final_theta();
        run.acceptance = accept_component_count(work, run.theta, required, delta);
      } catch (const Error& e) {
        run.error = e.what();
      }
    });
    for (std::size_t k = 0; k < runs.size(); ++k) {
      CandidateOutcome outcome;
      outcome.component = component;
      outcome.candidate = start + k;
      outcome.tau = tau;
      outcome.rounds = runs[k].rounds;
      outcome.accepted = runs[k].acceptance.accepted;
      outcome.accepted_size = runs[k].acceptance.rows.size();
      outcome.error = runs[k].error;
      outcomes.push_back(outcome);
      if (outcome.accepted) {
        winner = std::move(runs[k]);
        return start + k;
      }
    }
  }
  return candidates.size();
}

}  // namespace

RecoveryReport global_ilts(const Dataset& data, const GlobalConfig& config,
                           const SubspaceEstimate* subspace, const GroundTruth* truth) {
  config.validate();
  const std::size_t n = data.n();
  const std::size_t d = data.d();
  const std::size_t m = config.m;
  if (truth && (truth->m() != m || static_cast<std::size_t>(truth->theta_star.rows()) != d)) {
    throw InvalidArgument("global: ground truth shape does not match m and d");
  }

  RecoveryReport report;
  if (subspace) {
    if (subspace->d() != d) throw InvalidArgument("global: subspace dimension differs from d");
    subspace->validate(1e-8);
    report.subspace = *subspace;
  } else {
    report.subspace = estimate_subspace(data, std::min(m, std::min(n, d)));
  }
  report.radius_heuristic = !config.radius.has_value();
  report.radius = config.radius ? *config.radius : default_radius(data);
  report.delta = config.delta ? *config.delta : default_delta(config.target_accuracy, n);
  report.theta_hat = Matrix::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m),
                                      std::numeric_limits<double>::quiet_NaN());
  report.recovered.assign(m, false);
  report.accepted_sets.assign(m, {});
  report.accepted_counts.assign(m, 0);
  report.candidates_tried.assign(m, 0);
  report.tau_used.assign(m, 0.0);

  IndexSet working(n);
  std::iota(working.begin(), working.end(), std::size_t{0});

  for (std::size_t j = 0; j < m; ++j) {
    const Dataset work = data.subset(working);
    const auto candidates = generate_candidates(report.subspace, report.radius, config.epsilon_net,
                                                config.candidate_budget, mix_seed(config.seed, j));
    std::vector<double> taus;
    if (!config.tau_list.empty() && !config.tau_grid_search) {
      taus.push_back(config.tau_list[j]);
    } else {
      const double smallest = static_cast<double>(std::max<std::size_t>(d, 1)) / static_cast<double>(n);
      for (double tau : tau_grid(config.tau_grid_c, smallest)) {
        if (tau < 1.0) taus.push_back(tau);
      }
    }

    for (double tau : taus) {
      const std::size_t required = retained_count(tau, n);
      if (required < d || required > work.n()) continue;
      CandidateRun winner;
      const std::size_t hit = search_candidates(work, candidates, required, report.delta, config,
                                                j, tau, report.outcomes, winner);
      report.candidates_tried[j] += std::min(hit + 1, candidates.size());
      if (hit == candidates.size()) continue;

      report.recovered[j] = true;
      report.tau_used[j] = tau;
      report.theta_hat.col(static_cast<Eigen::Index>(j)) = winner.theta;
      IndexSet accepted;
      accepted.reserve(winner.acceptance.rows.size());
      for (std::size_t local : winner.acceptance.rows) accepted.push_back(working[local]);
      report.accepted_counts[j] = accepted.size();
      IndexSet remaining;
      std::set_difference(working.begin(), working.end(), accepted.begin(), accepted.end(),
                          std::back_inserter(remaining));
      working = std::move(remaining);
      report.accepted_sets[j] = std::move(accepted);
      break;
    }
  }

  const auto recovered = static_cast<std::size_t>(
      std::count(report.recovered.begin(), report.recovered.end(), true));
  report.partial = recovered < m;
  report.total_failure = recovered == 0;
  if (truth) report.matching = epsilon_recovery(report.theta_hat, truth->theta_star);
  return report;
}

namespace {

nlohmann::ordered_json number_or_null(double value) {
  return std::isfinite(value) ? nlohmann::ordered_json(value) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string report_to_json(const RecoveryReport& report, const GlobalConfig& config) {
  using json = nlohmann::ordered_json;
  json j;
  j["format"] = "trimfit-recovery";
  j["version"] = 1;
  j["m"] = report.theta_hat.cols();
  j["d"] = report.theta_hat.rows();
  j["partial"] = report.partial;
  j["total_failure"] = report.total_failure;
  json components = json::array();
  for (Eigen::Index c = 0; c < report.theta_hat.cols(); ++c) {
    const auto k = static_cast<std::size_t>(c);
    json comp;
    comp["recovered"] = static_cast<bool>(report.recovered[k]);
    if (report.recovered[k]) {
      json theta = json::array();
      for (Eigen::Index r = 0; r < report.theta_hat.rows(); ++r) theta.push_back(report.theta_hat(r, c));
      comp["theta_hat"] = theta;
    } else {
      comp["theta_hat"] = nullptr;
    }
    comp["accepted_count"] = report.accepted_counts[k];
    comp["candidates_tried"] = report.candidates_tried[k];
    comp["tau"] = report.tau_used[k];
    components.push_back(comp);
  }
  j["components"] = components;
  j["delta"] = report.delta;
  j["radius"] = report.radius;
  j["radius_source"] = report.radius_heuristic ? "heuristic-0.95-quantile" : "user";
  j["subspace"] = {{"provenance", std::string(to_string(report.subspace.provenance))},
                   {"m_tilde", report.subspace.m_tilde()}};
  if (report.matching) {
    j["epsilon_recovery"] = number_or_null(report.matching->value);
    j["matching"] = report.matching->permutation;
    json errors = json::array();
    for (double e : report.matching->errors) errors.push_back(number_or_null(e));
    j["per_component_errors"] = errors;
  }
  json cfg;
  cfg["m"] = config.m;
  cfg["tau_list"] = config.tau_list;
  cfg["tau_grid_search"] = config.tau_grid_search;
  cfg["delta"] = report.delta;
  cfg["radius"] = report.radius;
  cfg["candidate_budget"] = config.candidate_budget;
  cfg["epsilon_net"] = config.epsilon_net;
  cfg["seed"] = config.seed;
  cfg["ilts_max_rounds"] = config.ilts_max_rounds;
  cfg["ilts_tol"] = config.ilts_tol;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

void write_candidates_csv(std::ostream& out, const RecoveryReport& report) {
  out << "component,candidate,tau,rounds,accepted,accepted_size,error\n";
  for (const auto& o : report.outcomes) {
    std::string error = o.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << o.component << ',' << o.candidate << ',' << format_double(o.tau) << ',' << o.rounds
        << ',' << (o.accepted ? 1 : 0) << ',' << o.accepted_size << ',' << error << '\n';
  }
}

}  // namespace trimfit
