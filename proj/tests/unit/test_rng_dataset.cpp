#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include <trimfit/dataset.hpp>
#include <trimfit/error.hpp>
#include <trimfit/parallel.hpp>
#include <trimfit/rng.hpp>

using namespace trimfit;

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    (void)c.next_u64();
  }
  CHECK(Rng(1).next_u64() != Rng(2).next_u64());
  CHECK(mix_seed(5, 0) != mix_seed(5, 1));
  CHECK(mix_seed(5, 0) == mix_seed(5, 0));
}

TEST_CASE("mt19937_64 raw output matches the reference value") {
  // 10000th output of the default-seeded engine, fixed by the standard.
  Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ull);
}

TEST_CASE("uniform and normal moments") {
  Rng rng(7);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_index covers its range and shuffle permutes") {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.uniform_index(7)];
  for (int h : hits) CHECK(h > 800);

  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span<int>(v));
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 20);
  CHECK(*s.begin() == 0);
  CHECK(*s.rbegin() == 19);
}

TEST_CASE("dataset validates shape and finiteness") {
  Matrix X(3, 2);
  X << 1, 2, 3, 4, 5, 6;
  CHECK_THROWS_AS(Dataset(X, Vector::Zero(2)), InvalidArgument);
  Vector y(3);
  y << 1, std::nan(""), 2;
  CHECK_THROWS_AS(Dataset(X, y), InvalidArgument);
  Matrix Xi = X;
  Xi(1, 1) = INFINITY;
  CHECK_THROWS_AS(Dataset(Xi, Vector::Zero(3)), InvalidArgument);

  Dataset ok(X, Vector::Ones(3));
  CHECK(ok.n() == 3);
  CHECK(ok.d() == 2);
  const std::vector<std::size_t> rows{2, 0};
  Dataset sub = ok.subset(rows);
  CHECK(sub.n() == 2);
  CHECK(sub.X()(0, 0) == 5);
  CHECK(sub.X()(1, 1) == 2);
}

TEST_CASE("csv round trip is bit exact") {
  Rng rng(11);
  Matrix X(17, 3);
  Vector y(17);
  for (Eigen::Index i = 0; i < 17; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) X(i, c) = rng.normal() * std::pow(10.0, static_cast<double>(c) * 7 - 7);
    y(i) = rng.normal() / 3.0;
  }
  Dataset data(X, y);
  std::stringstream ss;
  write_dataset_csv(ss, data);
  const std::string text = ss.str();
  CHECK(text.rfind("y,x1,x2,x3\n", 0) == 0);
  Dataset back = read_dataset_csv(ss);
  CHECK(back == data);

  std::stringstream again;
  write_dataset_csv(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("csv reader skips comments and rejects malformed input") {
  std::stringstream good("# generated\n\ny,x1\n1,2\n3,4\n");
  Dataset d = read_dataset_csv(good);
  CHECK(d.n() == 2);
  CHECK(d.y()(1) == 3);

  std::stringstream bad_header("a,b\n1,2\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_header), IoError);
  std::stringstream short_row("y,x1,x2\n1,2\n");
  CHECK_THROWS_AS(read_dataset_csv(short_row), IoError);
  std::stringstream junk("y,x1\n1,abc\n");
  CHECK_THROWS_AS(read_dataset_csv(junk), IoError);
  CHECK_THROWS_AS(read_dataset_csv(std::filesystem::path("/nonexistent/file.csv")), IoError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (std::size_t threads : {0u, 1u, 4u}) {
    std::vector<int> seen(50, 0);
    parallel_for(50, threads, [&](std::size_t i) { ++seen[i]; });
    for (int s : seen) CHECK(s == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw InvalidArgument("boom");
                  }),
                  InvalidArgument);
}
