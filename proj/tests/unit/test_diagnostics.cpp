#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <oracles.hpp>
#include <trimfit/diagnostics.hpp>
#include <trimfit/error.hpp>
#include <trimfit/global_ilts.hpp>

using namespace trimfit;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  return X;
}

Vector unit(std::size_t d, Rng& rng) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v.normalized();
}

}  // namespace

TEST_CASE("q separation closed forms") {
  Matrix a(2, 2);
  a << 1, 0, 0, 1;
  auto qa = q_separation(a);
  CHECK(qa.q == doctest::Approx(std::sqrt(2.0)));
  CHECK(qa.q_j[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(qa.q_j[1] == doctest::Approx(std::sqrt(2.0)));

  Matrix b(2, 2);
  b << 2, 0, 0, 1;
  auto qb = q_separation(b);
  CHECK(qb.q == doctest::Approx(std::sqrt(5.0) / 2));
  CHECK(qb.q_j[0] == doctest::Approx(std::sqrt(5.0) / 2));
  CHECK(qb.q_j[1] == doctest::Approx(std::sqrt(5.0)));

  CHECK_THROWS_AS(q_separation(Matrix::Ones(2, 1)), InvalidArgument);
  Matrix z(2, 2);
  z << 1, 0, 0, 0;
  CHECK_THROWS_AS(q_separation(z), InvalidArgument);
}

TEST_CASE("q separation is rotation invariant and below every q_j") {
  const Matrix theta = gaussian(5, 4, 3).transpose().leftCols(4).topRows(4);
  const Matrix rot = orthonormalize(gaussian(4, 4, 9));
  auto before = q_separation(theta);
  auto after = q_separation(rot * theta);
  CHECK(std::abs(before.q - after.q) <= 1e-12);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(std::abs(before.q_j[j] - after.q_j[j]) <= 1e-12);
    CHECK(before.q <= before.q_j[j] + 1e-15);
  }
}

TEST_CASE("binomial saturates") {
  CHECK(binomial(6, 3) == 20);
  CHECK(binomial(10, 0) == 1);
  CHECK(binomial(3, 5) == 0);
  CHECK(binomial(100, 50) == kExactSubsetBudget + 1);
  CHECK(binomial(40, 20, 1000) == 1001);
}

TEST_CASE("exact regularity on the identity") {
  const Matrix I = Matrix::Identity(2, 2);
  auto one = feature_regularity_exact(I, 1);
  CHECK(one.psi_plus == doctest::Approx(1.0));
  CHECK(one.psi_minus == doctest::Approx(0.0));
  CHECK(one.mode == EstimateMode::exact);
  auto two = feature_regularity_exact(I, 2);
  CHECK(two.psi_plus == doctest::Approx(1.0));
  CHECK(two.psi_minus == doctest::Approx(1.0));
}

TEST_CASE("exact regularity matches a per-subset closed-form eigen solve") {
  const Matrix X = gaussian(6, 2, 44);
  double hi = 0.0, lo = INFINITY;
  Dataset dummy(X, Vector::Zero(6));
  oracle::for_each_subset(6, 3, [&](const IndexSet& s) {
    double a = 0, b = 0, c = 0;
    for (auto i : s) {
      const auto r = static_cast<Eigen::Index>(i);
      a += X(r, 0) * X(r, 0);
      b += X(r, 0) * X(r, 1);
      c += X(r, 1) * X(r, 1);
    }
    auto [mn, mx] = oracle::eig2(a, b, c);
    hi = std::max(hi, mx);
    lo = std::min(lo, mn);
  });
  auto est = feature_regularity_exact(X, 3);
  CHECK(est.subsets_evaluated == 20);
  CHECK(est.psi_plus == doctest::Approx(hi).epsilon(1e-12));
  CHECK(est.psi_minus == doctest::Approx(lo).epsilon(1e-12));
}

TEST_CASE("exact regularity refuses oversized enumerations") {
  const Matrix X = gaussian(60, 2, 1);
  try {
    feature_regularity_exact(X, 30);
    FAIL("expected BudgetExceeded");
  } catch (const BudgetExceeded& e) {
    CHECK(std::string(e.what()).find("2000000") != std::string::npos);
  }
  CHECK_THROWS_AS(feature_regularity_exact(X, 0), InvalidArgument);
}

TEST_CASE("sampled regularity is an inner bound of the exact interval") {
  const Matrix X = gaussian(12, 3, 5);
  auto exact = feature_regularity_exact(X, 5);
  auto sampled = feature_regularity_sampled(X, 5, 40, 1);
  CHECK(sampled.mode == EstimateMode::sampled);
  CHECK(sampled.psi_plus <= exact.psi_plus * (1 + 1e-12));
  CHECK(sampled.psi_minus >= exact.psi_minus * (1 - 1e-12));
  CHECK(sampled.psi_plus >= sampled.psi_minus);

  auto full = feature_regularity_sampled(X, 5, 1000, 1);
  CHECK(full.psi_plus == doctest::Approx(exact.psi_plus).epsilon(1e-12));
  CHECK(full.psi_minus == doctest::Approx(exact.psi_minus).epsilon(1e-12));
}

TEST_CASE("sampled regularity scaling on a Gaussian design") {
  const Matrix X = gaussian(1000, 10, 77);
  auto est = feature_regularity_sampled(X, 200, 500, 3);
  CHECK(est.psi_minus / 200.0 >= 0.05);
  CHECK(est.psi_plus / 200.0 <= 20.0);
}

TEST_CASE("affine error matches the literal sort oracle") {
  Rng rng(6);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix X = gaussian(8, 2, 100 + static_cast<std::uint64_t>(rep));
    const std::vector<std::size_t> labels{0, 1, 0, 1, 0, 0, 1, kExcludedLabel};
    const DirectionPair pair{unit(2, rng), unit(2, rng)};
    const double delta = 0.2 + 0.8 * rng.uniform();
    std::vector<double> own, other;
    for (std::size_t i = 0; i < 8; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (labels[i] == 0) own.push_back(delta * std::abs(X.row(r).dot(pair.u1)));
      else if (labels[i] == 1) other.push_back(std::abs(X.row(r).dot(pair.u2)));
    }
    // tau*_0 = 4/8, tau_0 = 0.3 gives an offset of ceil(0.2 * 8) = 2.
    const std::size_t expected = oracle::affine_error_literal(own, other, 2);
    CHECK(affine_error_for_pair(X, labels, 0, 0.3, delta, pair) == expected);
  }
}

TEST_CASE("affine error vanishes as delta goes to zero") {
  const Matrix X = gaussian(200, 3, 8);
  std::vector<std::size_t> labels(200);
  for (std::size_t i = 0; i < 200; ++i) labels[i] = i % 2;
  const std::vector<double> tau{0.4, 0.4};
  auto est = affine_error_estimate(X, labels, tau, 0, 1e-12, 32, 1);
  CHECK(est.value == 0);
  CHECK(est.directions_tried == 32);
}

TEST_CASE("affine error is monotone in delta on a fixed pool") {
  const Matrix X = gaussian(400, 5, 18);
  std::vector<std::size_t> labels(400);
  for (std::size_t i = 0; i < 400; ++i) labels[i] = i % 2;
  const std::vector<double> tau{0.4, 0.4};
  std::size_t prev = 0;
  for (double delta : {0.05, 0.1, 0.2, 0.4, 0.8, 1.0}) {
    auto est = affine_error_estimate(X, labels, tau, 0, delta, 40, 7);
    CHECK(est.value >= prev);
    CHECK(est.value <= 400);
    prev = est.value;
  }
  CHECK_THROWS_AS(affine_error_estimate(X, labels, tau, 0, 1.5, 4, 7), InvalidArgument);
  const std::vector<double> too_big{0.6, 0.4};
  CHECK_THROWS_AS(affine_error_estimate(X, labels, too_big, 0, 0.5, 4, 7), InvalidArgument);
  std::vector<std::size_t> none(400, 1);
  CHECK_THROWS_AS(affine_error_estimate(X, none, tau, 0, 0.5, 4, 7), InvalidArgument);
}

TEST_CASE("contraction bound arithmetic and monotonicity") {
  CHECK(contraction_bound(1, 4) == 0.5);
  CHECK(contraction_bound(3, 3) == 2.0);
  CHECK(contraction_bound(2, 4) > contraction_bound(1, 4));
  CHECK(contraction_bound(1, 8) < contraction_bound(1, 4));
  CHECK_THROWS_AS(contraction_bound(1, 0), InvalidArgument);
}

TEST_CASE("contraction delta") {
  Matrix theta(2, 2);
  theta << 1, -1, 0, 0;
  Vector t(2);
  t << 0.8, 0.0;
  // Q_0 = 2, so delta = (1/2) * 2 * 0.2 / 1.
  CHECK(contraction_delta(t, theta, 0) == doctest::Approx(0.2));
}

TEST_CASE("contraction check holds on a small contracting run") {
  Matrix theta(2, 2);
  theta << 1, -1, 0.5, 1;
  auto inst = generate_mlrc(MixtureSpec::balanced(theta), {0.1, Adversary::oblivious_random, 3}, 200, 4);
  IltsConfig cfg;
  cfg.tau = 0.35;
  const Vector start = theta.col(0) + 0.15 * (theta.col(1) - theta.col(0));
  auto trace = ilts_run(inst.data, start, cfg, &inst.truth);
  auto rounds = contraction_bound_check(inst.data, inst.truth, trace, 0, 0.35);
  REQUIRE(!rounds.empty());
  for (const auto& r : rounds) {
    CHECK(r.holds);
    CHECK(r.observed <= r.bound);
    CHECK(r.psi_plus >= 0.0);
    CHECK(r.psi_minus > 0.0);
  }
}

TEST_CASE("clean labels exclude corrupted rows") {
  auto inst = generate_mlrc(MixtureSpec::balanced(Matrix::Identity(2, 2)),
                            {0.2, Adversary::oblivious_random, 1}, 20, 2);
  auto labels = clean_labels(inst.truth);
  for (std::size_t i = 0; i < 20; ++i) {
    if (inst.truth.corrupted[i]) CHECK(labels[i] == kExcludedLabel);
    else CHECK(labels[i] == inst.truth.partition[i]);
  }
}
