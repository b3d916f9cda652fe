#include "trimfit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trimfit/error.hpp"
#include "trimfit/rng.hpp"

namespace trimfit {

QSeparation q_separation(const Matrix& theta_star) {
  const auto m = theta_star.cols();
  if (m < 2) throw InvalidArgument("q separation: need at least two components");
  QSeparation out;
  double max_norm = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double norm = theta_star.col(j).norm();
    if (norm == 0.0) throw InvalidArgument("q separation: component " + std::to_string(j) + " is zero");
    max_norm = std::max(max_norm, norm);
  }
  double min_pair = std::numeric_limits<double>::infinity();
  out.q_j.resize(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < m; ++l) {
      if (l != j) nearest = std::min(nearest, (theta_star.col(j) - theta_star.col(l)).norm());
    }
    min_pair = std::min(min_pair, nearest);
    out.q_j[static_cast<std::size_t>(j)] = nearest / theta_star.col(j).norm();
  }
  out.q = min_pair / max_norm;
  return out;
}

std::string_view to_string(EstimateMode mode) {
  return mode == EstimateMode::exact ? "exact" : "sampled";
}

std::uint64_t binomial(std::size_t n, std::size_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t value = 1;
  for (std::size_t i = 0; i < k; ++i) {
    // value * (n - i) is exactly divisible by i + 1; guard the product.
    if (static_cast<double>(value) * static_cast<double>(n - i) > 1e19) return cap + 1;
    value = value * (n - i) / (i + 1);
    if (value > cap) return cap + 1;
  }
  return value;
}

std::pair<double, double> gram_extremes(const Matrix& X, std::span<const std::size_t> rows) {
  const auto d = X.cols();
  Matrix gram = Matrix::Zero(d, d);
  for (std::size_t i : rows) {
    const auto r = static_cast<Eigen::Index>(i);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.row(r).transpose());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const auto& values = eig.eigenvalues();
  return {std::max(values(0), 0.0), std::max(values(d - 1), 0.0)};
}

namespace {

void check_subset_size(const Matrix& X, std::size_t k) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (k < 1 || k > n) {
    throw InvalidArgument("regularity: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
  }
}

// Visits every k-subset of [0, n) in lexicographic order.
template <typename Visit>
void for_each_subset(std::size_t n, std::size_t k, Visit&& visit) {
  IndexSet idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    visit(idx);
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) return;
    ++idx[pos - 1];
    for (std::size_t q = pos; q < k; ++q) idx[q] = idx[q - 1] + 1;
  }
}

struct Extremes {
  double plus = 0.0;
  double minus = std::numeric_limits<double>::infinity();
  std::uint64_t count = 0;

  void add(const std::pair<double, double>& ev) {
    minus = std::min(minus, ev.first);
    plus = std::max(plus, ev.second);
    ++count;
  }
};

IndexSet leverage_extreme(const Matrix& X, std::size_t k, bool largest) {
  const Matrix gram = X.transpose() * X;
  const Matrix pinv = Eigen::CompleteOrthogonalDecomposition<Matrix>(gram).pseudoInverse();
  const auto n = static_cast<std::size_t>(X.rows());
  Vector leverage(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    leverage(i) = X.row(i) * pinv * X.row(i).transpose();
  }
  IndexSet order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = leverage(static_cast<Eigen::Index>(a));
    const double lb = leverage(static_cast<Eigen::Index>(b));
    return largest ? la > lb : la < lb;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

RegularityEstimate feature_regularity_exact(const Matrix& X, std::size_t k) {
  check_subset_size(X, k);
  const auto n = static_cast<std::size_t>(X.rows());
  const std::uint64_t total = binomial(n, k);
  if (total > kExactSubsetBudget) {
    throw BudgetExceeded("regularity: C(" + std::to_string(n) + ", " + std::to_string(k) +
                         ") exceeds the exact enumeration budget of " +
                         std::to_string(kExactSubsetBudget) + " subsets");
  }
  Extremes ext;
  for_each_subset(n, k, [&](const IndexSet& rows) { ext.add(gram_extremes(X, rows)); });
  return {k, ext.plus, ext.minus, EstimateMode::exact, 0, ext.count};
}

RegularityEstimate feature_regularity_sampled(const Matrix& X, std::size_t k, std::size_t trials,
                                              std::uint64_t seed,
                                              std::span<const IndexSet> extra_subsets) {
  check_subset_size(X, k);
  if (trials < 1) throw InvalidArgument("regularity: trials must be at least 1");
  const auto n = static_cast<std::size_t>(X.rows());
  Extremes ext;
  const std::uint64_t total = binomial(n, k, std::numeric_limits<std::uint32_t>::max());
  if (trials >= total) {
    for_each_subset(n, k, [&](const IndexSet& rows) { ext.add(gram_extremes(X, rows)); });
  } else {
    Rng rng(seed);
    IndexSet pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t t = 0; t < trials; ++t) {
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
      }
      ext.add(gram_extremes(X, std::span<const std::size_t>(pool.data(), k)));
    }
    ext.add(gram_extremes(X, leverage_extreme(X, k, true)));
    ext.add(gram_extremes(X, leverage_extreme(X, k, false)));
  }
  for (const auto& subset : extra_subsets) {
    if (subset.size() != k) {
      throw InvalidArgument("regularity: supplied subset has size " +
                            std::to_string(subset.size()) + ", expected " + std::to_string(k));
    }
    ext.add(gram_extremes(X, subset));
  }
  return {k, ext.plus, ext.minus, EstimateMode::sampled, trials, ext.count};
}

std::vector<std::size_t> clean_labels(const GroundTruth& truth) {
  std::vector<std::size_t> labels = truth.partition;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (truth.corrupted[i]) labels[i] = kExcludedLabel;
  }
  return labels;
}

namespace {

std::size_t offset_count(double tau_star_j, double tau_j, std::size_t n) {
  const double gap = (tau_star_j - tau_j) * static_cast<double>(n);
  return static_cast<std::size_t>(std::max(0.0, std::ceil(gap - 1e-9)));
}

void check_labels(const Matrix& X, std::span<const std::size_t> labels, std::size_t j) {
  if (labels.size() != static_cast<std::size_t>(X.rows())) {
    throw InvalidArgument("affine error: label count differs from row count");
  }
  if (std::find(labels.begin(), labels.end(), j) == labels.end()) {
    throw InvalidArgument("affine error: component " + std::to_string(j) + " is empty");
  }
}

}  // namespace

std::size_t affine_error_for_pair(const Matrix& X, std::span<const std::size_t> labels,
                                  std::size_t j, double tau_j, double delta,
                                  const DirectionPair& pair) {
  check_labels(X, labels, j);
  const std::size_t n = labels.size();
  std::vector<double> own;
  std::vector<double> other;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (labels[i] == j) {
      own.push_back(delta * std::abs(X.row(r).dot(pair.u1)));
    } else if (labels[i] != kExcludedLabel) {
      other.push_back(std::abs(X.row(r).dot(pair.u2)));
    }
  }
  const double tau_star_j = static_cast<double>(own.size()) / static_cast<double>(n);
  const std::size_t offset = offset_count(tau_star_j, tau_j, n);
  std::sort(own.begin(), own.end(), std::greater<>());
  std::sort(other.begin(), other.end());
  std::size_t v = 0;
  // The left side is non-increasing in V and the right side non-decreasing,
  // so the condition holds on a prefix of V = 1, 2, ...
  while (v + 1 + offset <= own.size() && v + 1 <= other.size() &&
         own[v + offset] >= other[v]) {
    ++v;
  }
  return v;
}

AffineErrorEstimate affine_error_estimate(const Matrix& X, std::span<const std::size_t> labels,
                                          std::span<const double> tau, std::size_t j,
                                          double delta, std::size_t directions,
                                          std::uint64_t seed,
                                          std::span<const DirectionPair> informed) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("affine error: delta must lie in (0, 1]");
  if (j >= tau.size()) throw InvalidArgument("affine error: no tau for component " + std::to_string(j));
  check_labels(X, labels, j);
  const std::size_t own = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), j));
  const double tau_star_j = static_cast<double>(own) / static_cast<double>(labels.size());
  if (!(tau[j] < tau_star_j)) {
    throw InvalidArgument("affine error: tau_j must be below tau*_j = " + format_double(tau_star_j));
  }
  AffineErrorEstimate out{delta, j, 0, 0, EstimateMode::sampled};
  Rng rng(seed);
  const auto d = X.cols();
  auto unit = [&] {
    Vector v(d);
    do {
      for (Eigen::Index c = 0; c < d; ++c) v(c) = rng.normal();
    } while (v.norm() == 0.0);
    return Vector(v.normalized());
  };
  for (std::size_t t = 0; t < directions; ++t) {
    DirectionPair pair{unit(), unit()};
    out.value = std::max(out.value, affine_error_for_pair(X, labels, j, tau[j], delta, pair));
    ++out.directions_tried;
  }
  for (const auto& pair : informed) {
    out.value = std::max(out.value, affine_error_for_pair(X, labels, j, tau[j], delta, pair));
    ++out.directions_tried;
  }
  return out;
}

double contraction_bound(double psi_plus, double psi_minus) {
  if (!(psi_minus > 0.0)) throw InvalidArgument("contraction bound: psi_minus must be positive");
  return 2.0 * psi_plus / psi_minus;
}

double contraction_delta(const Vector& theta, const Matrix& theta_star, std::size_t j) {
  const auto sep = q_separation(theta_star);
  const Vector target = theta_star.col(static_cast<Eigen::Index>(j));
  return (1.0 / sep.q_j[j]) * 2.0 * (theta - target).norm() / target.norm();
}

std::vector<ContractionCheckRound> contraction_bound_check(
    const Dataset& data, const GroundTruth& truth, const SolverTrace& trace, std::size_t j,
    double tau, const ContractionCheckOptions& options) {
  const std::size_t n = data.n();
  const std::size_t m = truth.m();
  if (j >= m) throw InvalidArgument("contraction check: component out of range");
  const Matrix& theta_star = truth.theta_star;
  const Vector target = theta_star.col(static_cast<Eigen::Index>(j));
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < m; ++l) {
    if (l != j) {
      min_sep = std::min(min_sep, (target - theta_star.col(static_cast<Eigen::Index>(l))).norm());
    }
  }
  const auto labels = clean_labels(truth);
  std::vector<double> taus(m, 0.0);
  taus[j] = tau;

  const std::size_t retained = retained_count(tau, n);
  RegularityEstimate lower;
  if (binomial(n, retained) <= kExactSubsetBudget) {
    lower = feature_regularity_exact(data.X(), retained);
  } else {
    lower = feature_regularity_sampled(data.X(), retained, options.trials, mix_seed(options.seed, 1),
                                       trace.selected_sets);
  }

  std::vector<ContractionCheckRound> rounds;
  for (std::size_t t = 0; t + 1 < trace.iterates.size(); ++t) {
    const Vector& theta = trace.iterates[t];
    const double dist = (theta - target).norm();
    if (dist < 1e-14 || dist > 0.5 * min_sep) continue;
    ContractionCheckRound row;
    row.round = t;
    row.observed = (trace.iterates[t + 1] - target).norm() / dist;
    row.delta = std::min(contraction_delta(theta, theta_star, j), 1.0);

    std::vector<DirectionPair> informed;
    for (std::size_t l = 0; l < m; ++l) {
      if (l == j) continue;
      const Vector toward_other = theta_star.col(static_cast<Eigen::Index>(l)) - theta;
      if (toward_other.norm() == 0.0) continue;
      informed.push_back({(target - theta).normalized(), toward_other.normalized()});
    }
    row.affine_error = affine_error_estimate(data.X(), labels, taus, j, row.delta, options.directions,
                                             mix_seed(options.seed, 2), informed)
                           .value;
    row.psi_argument = std::min(row.affine_error + truth.corrupted_count(), n);
    if (row.psi_argument == 0) {
      row.psi_plus = 0.0;
      row.psi_plus_exact = true;
    } else if (binomial(n, row.psi_argument) <= kExactSubsetBudget) {
      row.psi_plus = feature_regularity_exact(data.X(), row.psi_argument).psi_plus;
      row.psi_plus_exact = true;
    } else {
      row.psi_plus = kPsiPlusInflation *
                     feature_regularity_sampled(data.X(), row.psi_argument, options.trials,
                                                mix_seed(options.seed, 3 + t))
                         .psi_plus;
    }
    row.psi_minus = lower.psi_minus;
    row.psi_minus_exact = lower.mode == EstimateMode::exact;
    row.bound = contraction_bound(row.psi_plus, row.psi_minus);
    row.holds = row.observed <= row.bound + 1e-12;
    rounds.push_back(row);
  }
  return rounds;
}

}  // namespace trimfit
