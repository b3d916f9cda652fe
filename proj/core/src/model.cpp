#include "trimfit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "trimfit/error.hpp"
#include "trimfit/rng.hpp"

namespace trimfit {

namespace {

constexpr double kWeightSlack = 1e-9;

void check_spd(const Matrix& cov, std::size_t d, std::size_t j) {
  const auto label = "covariance of component " + std::to_string(j);
  if (static_cast<std::size_t>(cov.rows()) != d ||
      static_cast<std::size_t>(cov.cols()) != d) {
    throw InvalidArgument(label + " must be " + std::to_string(d) + "x" +
                          std::to_string(d));
  }
  if (!cov.allFinite()) throw InvalidArgument(label + " has non-finite entries");
  const double scale = 1.0 + cov.cwiseAbs().maxCoeff();
  if (((cov - cov.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale) {
    throw InvalidArgument(label + " is not symmetric");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument(label + " is not positive definite");
  }
}

// Largest-remainder apportionment of n samples over normalized weights.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t n) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double share = weights[j] / total * static_cast<double>(n);
    counts[j] = static_cast<std::size_t>(std::floor(share));
    assigned += counts[j];
    remainders.emplace_back(share - std::floor(share), j);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

double dot_row(const Matrix& X, Eigen::Index i, const Matrix& theta, Eigen::Index j) {
  return X.row(i).dot(theta.col(j));
}

}  // namespace

void MixtureSpec::validate() const {
  if (components.cols() < 1) throw InvalidArgument("mixture: need at least one component");
  if (components.rows() < 1) throw InvalidArgument("mixture: dimension d must be positive");
  if (!components.allFinite()) throw InvalidArgument("mixture: non-finite component");
  if (weights.size() != m()) {
    throw InvalidArgument("mixture: expected " + std::to_string(m()) + " weights, got " +
                          std::to_string(weights.size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("mixture: weights must be strictly positive");
    }
    total += w;
  }
  if (total > 1.0 + kWeightSlack) {
    throw InvalidArgument("mixture: weights sum to more than one");
  }
  if (!covariances.empty()) {
    if (covariances.size() != m()) {
      throw InvalidArgument("mixture: expected " + std::to_string(m()) +
                            " covariance entries, got " +
                            std::to_string(covariances.size()));
    }
    for (std::size_t j = 0; j < m(); ++j) {
      if (covariances[j]) check_spd(*covariances[j], d(), j);
    }
  }
}

MixtureSpec MixtureSpec::balanced(Matrix components) {
  MixtureSpec spec;
  const auto m = static_cast<std::size_t>(components.cols());
  spec.components = std::move(components);
  spec.weights.assign(m, m == 0 ? 0.0 : 1.0 / static_cast<double>(m));
  return spec;
}

std::string_view to_string(Adversary adversary) {
  switch (adversary) {
    case Adversary::none: return "none";
    case Adversary::oblivious_random: return "oblivious-random";
    case Adversary::residual_targeted: return "residual-targeted";
    case Adversary::component_targeted: return "component-targeted";
  }
  return "none";
}

Adversary parse_adversary(std::string_view name) {
  for (auto a : {Adversary::none, Adversary::oblivious_random,
                 Adversary::residual_targeted, Adversary::component_targeted}) {
    if (name == to_string(a)) return a;
  }
  throw InvalidArgument("unknown adversary '" + std::string(name) + "'");
}

void CorruptionSpec::validate() const {
  if (!(gamma_star >= 0.0) || !std::isfinite(gamma_star)) {
    throw InvalidArgument("corruption: gamma_star must be a nonnegative number");
  }
  if (adversary == Adversary::none && gamma_star != 0.0) {
    throw InvalidArgument("corruption: adversary 'none' requires gamma_star = 0");
  }
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) {
    throw InvalidArgument("corruption: magnitude must be positive");
  }
}

std::size_t GroundTruth::corrupted_count() const {
  return static_cast<std::size_t>(std::count(corrupted.begin(), corrupted.end(), true));
}

double GroundTruth::tau_min() const {
  return tau_star.empty() ? 0.0 : *std::min_element(tau_star.begin(), tau_star.end());
}

double GroundTruth::gamma_star() const {
  const double denom = tau_min() * static_cast<double>(n());
  return denom > 0.0 ? static_cast<double>(corrupted_count()) / denom : 0.0;
}

IndexSet GroundTruth::clean_indices(std::size_t j) const {
  IndexSet out;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (partition[i] == j && !corrupted[i]) out.push_back(i);
  }
  return out;
}

std::size_t corruption_count(double gamma_star, std::size_t smallest_component) {
  // The slack absorbs representation error in products like 0.1 * 100.
  return static_cast<std::size_t>(
      std::floor(gamma_star * static_cast<double>(smallest_component) + 1e-9));
}

Vector phantom_direction(std::size_t d) {
  return Vector::Constant(static_cast<Eigen::Index>(d), 1.0 / std::sqrt(static_cast<double>(d)));
}

Instance generate_mlrc(const MixtureSpec& spec, const CorruptionSpec& corruption,
                       std::size_t n, std::uint64_t seed) {
  spec.validate();
  corruption.validate();
  const std::size_t d = spec.d();
  const std::size_t m = spec.m();
  if (n < d) {
    throw InvalidArgument("generate: n = " + std::to_string(n) + " is below d = " +
                          std::to_string(d));
  }
  const auto counts = apportion(spec.weights, n);
  for (std::size_t j = 0; j < m; ++j) {
    if (counts[j] == 0) {
      throw InvalidArgument("generate: component " + std::to_string(j) +
                            " receives no samples at n = " + std::to_string(n));
    }
  }
  const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
  if (corruption_count(corruption.gamma_star, smallest) > n) {
    throw InvalidArgument("generate: corrupted count exceeds n");
  }

  Rng rng(mix_seed(seed, 0));
  std::vector<std::size_t> labels;
  labels.reserve(n);
  for (std::size_t j = 0; j < m; ++j) labels.insert(labels.end(), counts[j], j);
  rng.shuffle(std::span<std::size_t>(labels));

  std::vector<std::optional<Matrix>> factors(m);
  for (std::size_t j = 0; j < m && !spec.covariances.empty(); ++j) {
    if (spec.covariances[j]) factors[j] = Matrix(spec.covariances[j]->llt().matrixL());
  }

  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d);
  Matrix X(rows, cols);
  Vector y(rows);
  Vector z(cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto j = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < cols; ++c) z(c) = rng.normal();
    if (factors[j]) {
      X.row(i) = (*factors[j] * z).transpose();
    } else {
      X.row(i) = z.transpose();
    }
    y(i) = dot_row(X, i, spec.components, static_cast<Eigen::Index>(j));
  }

  GroundTruth truth;
  truth.theta_star = spec.components;
  truth.partition = std::move(labels);
  truth.corrupted.assign(n, false);
  truth.r = Vector::Zero(rows);
  truth.tau_star.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    truth.tau_star[j] = static_cast<double>(counts[j]) / static_cast<double>(n);
  }
  truth.seed = seed;

  Dataset clean(std::move(X), std::move(y));
  if (corruption.gamma_star == 0.0) return {std::move(clean), std::move(truth)};
  auto out = inject_corruptions(clean, truth, corruption, mix_seed(seed, 1));
  out.truth.seed = seed;
  return out;
}

Instance inject_corruptions(const Dataset& data, const GroundTruth& truth,
                            const CorruptionSpec& corruption, std::uint64_t seed) {
  corruption.validate();
  const std::size_t n = data.n();
  const std::size_t m = truth.m();
  if (truth.n() != n || truth.corrupted.size() != n ||
      static_cast<std::size_t>(truth.r.size()) != n ||
      static_cast<std::size_t>(truth.theta_star.rows()) != data.d()) {
    throw InvalidArgument("inject: dataset and ground truth disagree in shape");
  }
  if (truth.corrupted_count() != 0) {
    throw InvalidArgument("inject: ground truth already has corrupted samples");
  }
  std::vector<std::size_t> sizes(m, 0);
  for (auto label : truth.partition) {
    if (label >= m) throw InvalidArgument("inject: partition label out of range");
    ++sizes[label];
  }
  const auto smallest_it = std::min_element(sizes.begin(), sizes.end());
  const std::size_t smallest_component =
      static_cast<std::size_t>(std::distance(sizes.begin(), smallest_it));
  const std::size_t count = corruption_count(corruption.gamma_star, *smallest_it);
  if (count > n) throw InvalidArgument("inject: corrupted count exceeds n");

  Instance out{data, truth};
  if (count == 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  switch (corruption.adversary) {
    case Adversary::none:
      throw InvalidArgument("inject: adversary 'none' cannot corrupt samples");
    case Adversary::oblivious_random: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      // Partial Fisher-Yates: the first `count` slots are a uniform subset.
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t k = i + rng.uniform_index(n - i);
        std::swap(order[i], order[k]);
      }
      chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
      break;
    }
    case Adversary::residual_targeted: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      const Vector& y = data.y();
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(y(static_cast<Eigen::Index>(a))) <
               std::abs(y(static_cast<Eigen::Index>(b)));
      });
      chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
      break;
    }
    case Adversary::component_targeted: {
      if (count > *smallest_it) {
        throw InvalidArgument("inject: " + std::to_string(count) +
                              " corruptions exceed the smallest component (" +
                              std::to_string(*smallest_it) + " samples)");
      }
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (truth.partition[i] == smallest_component) members.push_back(i);
      }
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t k = i + rng.uniform_index(members.size() - i);
        std::swap(members[i], members[k]);
      }
      chosen.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(count));
      break;
    }
  }
  std::sort(chosen.begin(), chosen.end());

  const Matrix& X = data.X();
  Vector y = data.y();
  const Vector phantom = corruption.magnitude * phantom_direction(data.d());
  for (std::size_t i : chosen) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto label = static_cast<Eigen::Index>(truth.partition[i]);
    const double clean = dot_row(X, row, truth.theta_star, label);
    double r = 0.0;
    if (corruption.adversary == Adversary::oblivious_random) {
      r = corruption.magnitude * rng.normal();
    } else {
      r = X.row(row).dot(phantom) - clean;
    }
    out.truth.r(row) = r;
    out.truth.corrupted[i] = true;
    y(row) = clean + r;
  }
  out.data = Dataset(X, std::move(y));
  for (std::size_t j = 0; j < m; ++j) {
    out.truth.tau_star[j] = static_cast<double>(out.truth.clean_indices(j).size()) /
                            static_cast<double>(n);
  }
  return out;
}

double reconstruction_error(const Dataset& data, const GroundTruth& truth) {
  double worst = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double yi = data.y()(row);
    const double fit =
        dot_row(data.X(), row, truth.theta_star, static_cast<Eigen::Index>(truth.partition[i]));
    worst = std::max(worst, std::abs(yi - fit - truth.r(row)) / (1.0 + std::abs(yi)));
  }
  return worst;
}

std::string truth_to_json(const GroundTruth& truth) {
  nlohmann::ordered_json j;
  j["format"] = "trimfit-truth";
  j["version"] = 1;
  j["generator"] = truth.generator;
  j["seed"] = truth.seed;
  j["d"] = truth.theta_star.rows();
  j["m"] = truth.theta_star.cols();
  j["n"] = truth.n();
  auto cols = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < truth.theta_star.cols(); ++c) {
    std::vector<double> col(truth.theta_star.col(c).data(),
                            truth.theta_star.col(c).data() + truth.theta_star.rows());
    cols.push_back(col);
  }
  j["theta_star"] = cols;
  j["partition"] = truth.partition;
  j["corrupted"] = truth.corrupted;
  j["r"] = std::vector<double>(truth.r.data(), truth.r.data() + truth.r.size());
  j["tau_star"] = truth.tau_star;
  j["gamma_star"] = truth.gamma_star();
  return j.dump(2) + "\n";
}

GroundTruth truth_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("truth json: ") + e.what());
  }
  GroundTruth truth;
  try {
    const auto cols = j.at("theta_star").get<std::vector<std::vector<double>>>();
    if (cols.empty() || cols.front().empty()) throw IoError("truth json: empty theta_star");
    const auto d = static_cast<Eigen::Index>(cols.front().size());
    truth.theta_star.resize(d, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (static_cast<Eigen::Index>(cols[c].size()) != d) {
        throw IoError("truth json: ragged theta_star");
      }
      for (Eigen::Index r = 0; r < d; ++r) {
        truth.theta_star(r, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(r)];
      }
    }
    truth.partition = j.at("partition").get<std::vector<std::size_t>>();
    truth.corrupted = j.at("corrupted").get<std::vector<bool>>();
    const auto r = j.at("r").get<std::vector<double>>();
    truth.r = Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size()));
    truth.tau_star = j.at("tau_star").get<std::vector<double>>();
    truth.seed = j.at("seed").get<std::uint64_t>();
    truth.generator = j.at("generator").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("truth json: ") + e.what());
  }
  const std::size_t n = truth.partition.size();
  if (truth.corrupted.size() != n || static_cast<std::size_t>(truth.r.size()) != n ||
      truth.tau_star.size() != truth.m()) {
    throw IoError("truth json: inconsistent array lengths");
  }
  for (auto label : truth.partition) {
    if (label >= truth.m()) throw IoError("truth json: partition label out of range");
  }
  return truth;
}

void write_truth_json(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << truth_to_json(truth);
  if (!out) throw IoError("failed writing " + path.string());
}

GroundTruth read_truth_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return truth_from_json(buffer.str());
}

}  // namespace trimfit
