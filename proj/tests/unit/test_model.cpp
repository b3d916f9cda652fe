#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <trimfit/error.hpp>
#include <trimfit/model.hpp>

using namespace trimfit;

namespace {

std::string csv_bytes(const Dataset& data) {
  std::stringstream ss;
  write_dataset_csv(ss, data);
  return ss.str();
}

Matrix cols(std::initializer_list<std::initializer_list<double>> columns) {
  const auto m = static_cast<Eigen::Index>(columns.size());
  const auto d = static_cast<Eigen::Index>(columns.begin()->size());
  Matrix out(d, m);
  Eigen::Index j = 0;
  for (const auto& c : columns) {
    Eigen::Index i = 0;
    for (double v : c) out(i++, j) = v;
    ++j;
  }
  return out;
}

}  // namespace

TEST_CASE("noiseless single component reproduces x[0]") {
  auto inst = generate_mlrc(MixtureSpec::balanced(cols({{1, 0}})), {}, 4, 1);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(inst.data.y()(i) == inst.data.X()(i, 0));
  CHECK(inst.truth.corrupted_count() == 0);
  CHECK(inst.truth.tau_star[0] == 1.0);
}

TEST_CASE("balanced two-component split and reconstruction identity") {
  auto inst = generate_mlrc(MixtureSpec::balanced(cols({{1}, {-1}})), {}, 100, 7);
  const auto ones = std::count(inst.truth.partition.begin(), inst.truth.partition.end(), 1u);
  CHECK(ones == 50);
  CHECK(reconstruction_error(inst.data, inst.truth) <= 1e-12);
  CHECK(inst.truth.tau_star == std::vector<double>{0.5, 0.5});
}

TEST_CASE("corruption count is floor(gamma tau_min n) for every adversary") {
  const MixtureSpec spec = MixtureSpec::balanced(cols({{1, 0, 0}, {0, 1, 0}}));
  for (Adversary a : {Adversary::oblivious_random, Adversary::residual_targeted,
                      Adversary::component_targeted}) {
    auto inst = generate_mlrc(spec, {0.1, a, 5.0}, 200, 3);
    CHECK(inst.truth.corrupted_count() == 10);
    CHECK(reconstruction_error(inst.data, inst.truth) <= 1e-12);
    for (std::size_t i = 0; i < 200; ++i) {
      if (!inst.truth.corrupted[i]) CHECK(inst.truth.r(static_cast<Eigen::Index>(i)) == 0.0);
    }
    const double clean0 = static_cast<double>(inst.truth.clean_indices(0).size()) / 200.0;
    CHECK(inst.truth.tau_star[0] == clean0);
  }
  CHECK(corruption_count(0.4, 5) == 2);
  CHECK(corruption_count(0.3, 10) == 3);
}

TEST_CASE("inject_corruptions edge cases") {
  const MixtureSpec spec = MixtureSpec::balanced(cols({{1, 0}, {0, 1}}));
  auto clean = generate_mlrc(spec, {}, 10, 9);

  auto same = inject_corruptions(clean.data, clean.truth, {}, 1);
  CHECK(same.data == clean.data);
  CHECK(same.truth.corrupted_count() == 0);

  auto two = inject_corruptions(clean.data, clean.truth, {0.4, Adversary::oblivious_random, 1.0}, 2);
  CHECK(two.truth.corrupted_count() == 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    if (!two.truth.corrupted[static_cast<std::size_t>(i)]) {
      CHECK(two.data.y()(i) == clean.data.y()(i));
      CHECK(two.data.X().row(i) == clean.data.X().row(i));
    }
  }
  CHECK_THROWS_AS(inject_corruptions(two.data, two.truth, {0.4, Adversary::oblivious_random, 1.0}, 3),
                  InvalidArgument);
  CHECK_THROWS_AS(inject_corruptions(clean.data, clean.truth, {3.0, Adversary::oblivious_random, 1.0}, 3),
                  InvalidArgument);
}

TEST_CASE("residual-targeted corrupts the smallest |y| rows") {
  const MixtureSpec spec = MixtureSpec::balanced(cols({{1, 0.5}, {-1, 1}}));
  auto clean = generate_mlrc(spec, {}, 40, 21);
  auto out = inject_corruptions(clean.data, clean.truth, {0.1, Adversary::residual_targeted, 2.0}, 4);
  // Sort oracle on the clean responses.
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(clean.data.y()(static_cast<Eigen::Index>(a))) <
           std::abs(clean.data.y()(static_cast<Eigen::Index>(b)));
  });
  CHECK(out.truth.corrupted_count() == 2);
  CHECK(out.truth.corrupted[order[0]]);
  CHECK(out.truth.corrupted[order[1]]);
  const Vector phantom = 2.0 * phantom_direction(2);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    CHECK(out.data.y()(i) == doctest::Approx(out.data.X().row(i).dot(phantom)));
  }
}

TEST_CASE("component-targeted stays inside the smallest component") {
  MixtureSpec spec;
  spec.components = cols({{1, 0}, {0, 1}});
  spec.weights = {0.7, 0.3};
  auto inst = generate_mlrc(spec, {0.2, Adversary::component_targeted, 1.0}, 100, 5);
  CHECK(inst.truth.corrupted_count() == 6);
  for (std::size_t i = 0; i < 100; ++i) {
    if (inst.truth.corrupted[i]) CHECK(inst.truth.partition[i] == 1);
  }
}

TEST_CASE("generation is deterministic byte for byte") {
  const MixtureSpec spec = MixtureSpec::balanced(cols({{1, 2, 3}, {-1, 0, 2}}));
  const CorruptionSpec c{0.05, Adversary::oblivious_random, 10.0};
  auto a = generate_mlrc(spec, c, 300, 99);
  auto b = generate_mlrc(spec, c, 300, 99);
  auto other = generate_mlrc(spec, c, 300, 100);
  CHECK(csv_bytes(a.data) == csv_bytes(b.data));
  CHECK(truth_to_json(a.truth) == truth_to_json(b.truth));
  CHECK(csv_bytes(a.data) != csv_bytes(other.data));
}

TEST_CASE("isotropic empirical covariance is close to identity") {
  const Matrix theta = Matrix::Identity(5, 1);
  auto inst = generate_mlrc(MixtureSpec::balanced(theta), {}, 10000, 2024);
  const Matrix cov = inst.data.X().transpose() * inst.data.X() / 10000.0;
  const double err = (cov - Matrix::Identity(5, 5)).jacobiSvd().singularValues()(0);
  CHECK(err <= 0.1);
}

TEST_CASE("non-isotropic covariance is honoured") {
  MixtureSpec spec = MixtureSpec::balanced(Matrix::Identity(2, 1));
  Matrix sigma(2, 2);
  sigma << 4, 1, 1, 2;
  spec.covariances = {sigma};
  auto inst = generate_mlrc(spec, {}, 20000, 8);
  const Matrix cov = inst.data.X().transpose() * inst.data.X() / 20000.0;
  CHECK((cov - sigma).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("spec validation errors") {
  MixtureSpec spec = MixtureSpec::balanced(cols({{1, 0}, {0, 1}}));
  spec.covariances = {Matrix::Identity(3, 3), std::nullopt};
  CHECK_THROWS_AS(generate_mlrc(spec, {}, 10, 1), InvalidArgument);

  Matrix not_spd(2, 2);
  not_spd << 1, 2, 2, 1;
  spec.covariances = {not_spd, std::nullopt};
  CHECK_THROWS_AS(generate_mlrc(spec, {}, 10, 1), InvalidArgument);

  spec.covariances.clear();
  spec.weights = {0.8, 0.4};
  CHECK_THROWS_AS(generate_mlrc(spec, {}, 10, 1), InvalidArgument);
  spec.weights = {1.0, 0.0};
  CHECK_THROWS_AS(generate_mlrc(spec, {}, 10, 1), InvalidArgument);

  CHECK_THROWS_AS(generate_mlrc(MixtureSpec::balanced(Matrix::Identity(3, 1)), {}, 2, 1),
                  InvalidArgument);
  CHECK_THROWS_AS(CorruptionSpec({0.1, Adversary::none, 1.0}).validate(), InvalidArgument);
  CHECK_THROWS_AS(CorruptionSpec({0.1, Adversary::oblivious_random, 0.0}).validate(), InvalidArgument);
}

TEST_CASE("adversary names round trip") {
  for (Adversary a : {Adversary::none, Adversary::oblivious_random, Adversary::residual_targeted,
                      Adversary::component_targeted}) {
    CHECK(parse_adversary(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_adversary("sneaky"), InvalidArgument);
}

TEST_CASE("truth json round trip") {
  const MixtureSpec spec = MixtureSpec::balanced(cols({{1, 2}, {-1, 0.5}}));
  auto inst = generate_mlrc(spec, {0.2, Adversary::oblivious_random, 3.0}, 50, 12);
  const std::string text = truth_to_json(inst.truth);
  CHECK(text.find(std::string(kGeneratorVersion)) != std::string::npos);
  GroundTruth back = truth_from_json(text);
  CHECK(back.theta_star == inst.truth.theta_star);
  CHECK(back.partition == inst.truth.partition);
  CHECK(back.corrupted == inst.truth.corrupted);
  CHECK(back.r == inst.truth.r);
  CHECK(back.seed == 12);
  CHECK(truth_to_json(back) == text);
  CHECK_THROWS_AS(truth_from_json("{\"format\": \"other\"}"), IoError);
  CHECK_THROWS_AS(truth_from_json("not json"), IoError);
}
