#include <doctest.h>

#include <random>
#include <vector>

#include "fedgeo/anomaly.hpp"
#include "oracles.hpp"

using namespace fedgeo;

TEST_CASE("robust_scores on the five-client example") {
  const std::vector<double> d = {1.0, 1.1, 0.9, 1.05, 5.0};
  const auto s = robust_scores(d, 1e-8, 3);
  CHECK(s.round == 3);
  CHECK(s.median == doctest::Approx(1.05).epsilon(1e-15));
  CHECK(s.mad == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(s.zscores[4] == doctest::Approx(79.0).epsilon(1e-5));
  for (std::size_t c = 0; c < d.size(); ++c) {
    CHECK(s.zscores[c] == (d[c] - s.median) / (s.mad + s.epsilon));
  }
  CHECK(flag_outliers(s, 3.5) == std::vector<std::size_t>{4});
}

TEST_CASE("equal divergences give MAD 0 and z 0") {
  const std::vector<double> d(7, 2.5);
  const auto s = robust_scores(d);
  CHECK(s.mad == 0.0);
  for (double z : s.zscores) CHECK(z == 0.0);
  CHECK(flag_outliers(s, 0.1).empty());
}

TEST_CASE("even count median averages the central pair") {
  const std::vector<double> d = {4.0, 1.0, 3.0, 2.0};
  CHECK(median_of(d) == 2.5);
}

TEST_CASE("robust_scores preconditions") {
  const std::vector<double> one = {1.0};
  const std::vector<double> two = {1.0, 2.0};
  CHECK_THROWS_AS(robust_scores(one), std::invalid_argument);
  CHECK_THROWS_AS(robust_scores(two, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(flag_outliers(robust_scores(two), 0.0), std::invalid_argument);
}

TEST_CASE("flag_outliers orders by descending z") {
  const std::vector<double> d = {1.0, 1.0, 1.1, 0.9, 9.0, 1.0, 20.0, 1.05};
  const auto flagged = flag_outliers(robust_scores(d), 3.5);
  CHECK(flagged == std::vector<std::size_t>{6, 4});
}

TEST_CASE("translation invariance of z-scores") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> d(10);
    for (double& x : d) x = u(rng);
    std::vector<double> shifted = d;
    for (double& x : shifted) x += 3.25;
    const auto a = robust_scores(d);
    const auto b = robust_scores(shifted);
    for (std::size_t c = 0; c < d.size(); ++c) {
      CHECK(b.zscores[c] == doctest::Approx(a.zscores[c]).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("scale equivariance: |z_scaled - z| <= 1e-6 when MAD >= 1e-3") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 5.0), k(0.1, 10.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(10);
    for (double& x : d) x = u(rng);
    const auto a = robust_scores(d);
    if (a.mad < 1e-3) continue;
    const double factor = k(rng);
    std::vector<double> scaled = d;
    for (double& x : scaled) x *= factor;
    const auto b = robust_scores(scaled);
    if (b.mad < 1e-3) continue;
    ++checked;
    for (std::size_t c = 0; c < d.size(); ++c) CHECK(std::abs(b.zscores[c] - a.zscores[c]) <= 1e-6);
  }
  CHECK(checked > 150);
}

TEST_CASE("single planted outlier at median + 10 MAD has the unique maximum z") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(9);
    for (double& x : d) x = u(rng);
    const double med = oracle::median(d);
    const double m = oracle::mad(d);
    REQUIRE(m > 0.0);
    const std::size_t target = rng() % d.size();
    d[target] = med + 10.0 * m;
    const auto s = robust_scores(d);
    for (std::size_t c = 0; c < d.size(); ++c) {
      if (c != target) CHECK(s.zscores[c] < s.zscores[target]);
    }
  }
}

TEST_CASE("median and MAD match the sort-based reference exactly (sizes 2..12)") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> size(2, 12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> d(size(rng));
    for (double& x : d) x = trial % 3 == 0 ? static_cast<double>(rng() % 4) : u(rng);
    const auto s = robust_scores(d);
    CHECK(s.median == oracle::median(d));
    CHECK(s.mad == oracle::mad(d));
  }
}
