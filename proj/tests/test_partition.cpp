#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedgeo/partition.hpp"

using namespace fedgeo;

namespace {

std::vector<int> balanced_labels(std::size_t n, int classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  return y;
}

void check_is_partition(const std::vector<ClientShard>& shards, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (std::size_t c = 0; c < shards.size(); ++c) {
    CHECK(shards[c].client_id == c);
    CHECK_FALSE(shards[c].sample_indices.empty());
    for (std::size_t i : shards[c].sample_indices) {
      REQUIRE(i < n);
      ++seen[i];
    }
  }
  for (int s : seen) REQUIRE(s == 1);
}

}  // namespace

TEST_CASE("partition property: disjoint and covering for any alpha and seed") {
  const auto y = balanced_labels(2000, 10);
  for (double alpha : {0.01, 0.1, 1.0, 10.0, 1000.0}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto shards = dirichlet_partition(y, 10, {10, alpha, seed});
      REQUIRE(shards.size() == 10);
      check_is_partition(shards, y.size());
    }
  }
}

TEST_CASE("near-IID limit: alpha = 1e6 keeps each client within 2 points of global") {
  const auto y = balanced_labels(10000, 10);
  const auto shards = dirichlet_partition(y, 10, {10, 1e6, 3});
  for (const auto& s : shards) {
    std::vector<double> count(10, 0.0);
    for (std::size_t i : s.sample_indices) count[static_cast<std::size_t>(y[i])] += 1.0;
    for (double c : count) {
      CHECK(std::abs(c / static_cast<double>(s.sample_indices.size()) - 0.1) <= 0.02);
    }
  }
}

TEST_CASE("alpha = 0.1 produces strongly skewed clients") {
  // Fashion-MNIST train labels are 6000 per class; same histogram here.
  const auto y = balanced_labels(60000, 10);
  const auto shards = dirichlet_partition(y, 10, {10, 0.1, 1});
  double best_top2 = 0.0;
  for (const auto& s : shards) {
    std::vector<double> count(10, 0.0);
    for (std::size_t i : s.sample_indices) count[static_cast<std::size_t>(y[i])] += 1.0;
    std::sort(count.begin(), count.end(), std::greater<>());
    best_top2 = std::max(best_top2, (count[0] + count[1]) / static_cast<double>(s.sample_indices.size()));
  }
  MESSAGE("largest top-2-class share at alpha=0.1: " << best_top2);
  CHECK(best_top2 > 0.6);
}

TEST_CASE("monotone heterogeneity: mean skew over seeds 1..5 decreases with alpha") {
  const auto y = balanced_labels(6000, 10);
  auto mean_skew = [&](double alpha) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      total += label_skew(y, 10, dirichlet_partition(y, 10, {10, alpha, seed}));
    }
    return total / 5.0;
  };
  const double s01 = mean_skew(0.1), s1 = mean_skew(1.0), s10 = mean_skew(10.0);
  MESSAGE("skew: alpha=0.1 " << s01 << ", alpha=1 " << s1 << ", alpha=10 " << s10);
  CHECK(s01 > s1);
  CHECK(s1 > s10);
}

TEST_CASE("partition is deterministic and validates inputs") {
  const auto y = balanced_labels(500, 5);
  const auto a = dirichlet_partition(y, 5, {4, 0.5, 11});
  const auto b = dirichlet_partition(y, 5, {4, 0.5, 11});
  for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c].sample_indices == b[c].sample_indices);
  CHECK_THROWS_AS(dirichlet_partition(y, 5, {4, 0.0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_partition(y, 5, {1, 1.0, 1}), std::invalid_argument);
  const std::vector<int> few = {0, 1, 0};
  CHECK_THROWS_AS(dirichlet_partition(few, 2, {4, 1.0, 1}), std::invalid_argument);
}

TEST_CASE("empty shards are repaired by redrawing") {
  // 12 samples over 10 clients: most draws leave a shard empty.
  const auto y = balanced_labels(12, 2);
  const auto shards = dirichlet_partition(y, 2, {10, 5.0, 1});
  check_is_partition(shards, y.size());
}
