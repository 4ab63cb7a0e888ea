#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fedgeo/geometry.hpp"
#include "fedgeo/verify.hpp"
#include "oracles.hpp"

using namespace fedgeo;

namespace {

MlpModel random_model(const std::vector<std::size_t>& sizes, std::mt19937_64& rng) {
  MlpModel m = init_model(sizes, rng());
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& l : m.layers()) {
    for (double& b : l.bias) b = u(rng);
  }
  return m;
}

DenseMatrix random_inputs(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

MlpModel one_hidden(std::vector<double> w, std::vector<double> b) {
  std::vector<LayerParams> layers;
  const std::size_t width = b.size();
  layers.push_back({DenseMatrix(1, width, std::move(w)), std::move(b)});
  layers.push_back({DenseMatrix(width, 2, 1.0), {0.0, 0.0}});
  return MlpModel(std::move(layers));
}

MlpModel permute_all_hidden(const MlpModel& m, std::mt19937_64& rng) {
  MlpModel out = m;
  for (std::size_t l = 0; l < m.hidden_layer_count(); ++l) {
    std::vector<std::size_t> perm(m.layer(l).fan_out());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    out = permute_hidden_layer(out, l, perm);
  }
  return out;
}

}  // namespace

TEST_CASE("extract_patterns hand case") {
  const MlpModel m = one_hidden({1.0, -1.0}, {0.0, 0.0});
  const auto p = extract_patterns(m, DenseMatrix(2, 1, std::vector<double>{2.0, -3.0}));
  REQUIRE(p.layer_count() == 1);
  CHECK(p.per_layer[0].get(0, 0));
  CHECK_FALSE(p.per_layer[0].get(0, 1));
  CHECK_FALSE(p.per_layer[0].get(1, 0));
  CHECK(p.per_layer[0].get(1, 1));
}

TEST_CASE("preactivation exactly zero maps to bit 0") {
  const MlpModel m = one_hidden({1.0, 0.0}, {-2.0, 0.0});
  const auto p = extract_patterns(m, DenseMatrix(1, 1, 2.0));
  CHECK_FALSE(p.per_layer[0].get(0, 0));  // 2 - 2 == 0
  CHECK_FALSE(p.per_layer[0].get(0, 1));  // 0 * 2 + 0 == 0
}

TEST_CASE("identical probe rows give identical pattern rows; output layer excluded") {
  std::mt19937_64 rng(3);
  const MlpModel m = random_model({5, 9, 7, 3}, rng);
  DenseMatrix probe = random_inputs(4, 5, rng);
  auto r0 = probe.row(0);
  std::copy(r0.begin(), r0.end(), probe.row(3).begin());
  const auto p = extract_patterns(m, probe);
  REQUIRE(p.layer_count() == 2);
  for (const auto& layer : p.per_layer) {
    for (std::size_t j = 0; j < layer.cols(); ++j) CHECK(layer.get(0, j) == layer.get(3, j));
  }
  CHECK_THROWS_AS(extract_patterns(m, DenseMatrix(2, 4)), std::invalid_argument);
}

TEST_CASE("extract_patterns agrees with a scalar forward pass") {
  std::mt19937_64 rng(9);
  const MlpModel m = random_model({6, 70, 11, 3}, rng);
  const DenseMatrix x = random_inputs(13, 6, rng);
  const auto p = extract_patterns(m, x);
  for (std::size_t l = 0; l < 2; ++l) {
    const auto ref = oracle::hidden_pattern(m, x, l);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < ref[i].size(); ++j) {
        CHECK(p.per_layer[l].get(i, j) == (ref[i][j] != 0));
      }
    }
  }
}

TEST_CASE("affinity hand cases") {
  const auto k = affinity_matrix(oracle::to_pattern({{1, 0, 1, 1}, {1, 1, 0, 1}, {0, 1, 0, 0}}));
  CHECK(k.values(0, 1) == 0.5);
  CHECK(k.values(0, 0) == 1.0);
  CHECK(k.values(0, 2) == 0.0);
  CHECK(k.layer_width == 4);
  CHECK_THROWS_AS(affinity_matrix(PatternMatrix(0, 4)), std::invalid_argument);
}

TEST_CASE("packed affinity equals the naive double loop (incl. multi-word rows)") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> rows(1, 32), cols(1, 200);
  for (int trial = 0; trial < 200; ++trial) {
    const auto bits = oracle::random_bits(rows(rng), cols(rng), rng);
    const auto k = affinity_matrix(oracle::to_pattern(bits));
    const auto ref = oracle::affinity(bits);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      for (std::size_t j = 0; j < bits.size(); ++j) REQUIRE(k.values(i, j) == ref[i][j]);
    }
  }
}

TEST_CASE("affinity invariants: symmetric, unit diagonal, in [0,1], quantized by 1/n") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 130;
    const auto k = affinity_matrix(oracle::to_pattern(oracle::random_bits(12, n, rng)));
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(k.values(i, i) == 1.0);
      for (std::size_t j = 0; j < 12; ++j) {
        const double v = k.values(i, j);
        CHECK(v == k.values(j, i));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        const double steps = (1.0 - v) * static_cast<double>(n);
        CHECK(std::abs(steps - std::round(steps)) < 1e-9);
      }
    }
  }
}

TEST_CASE("layer_distance") {
  AffinityMatrix a{DenseMatrix(2, 2, std::vector<double>{1.0, 0.5, 0.5, 1.0}), 2};
  AffinityMatrix b{DenseMatrix(2, 2, std::vector<double>{1.0, 0.0, 0.0, 1.0}), 2};
  CHECK(layer_distance(a, a) == 0.0);
  CHECK(layer_distance(a, b) == doctest::Approx(0.70710678118654757).epsilon(1e-15));
  CHECK(layer_distance(a, b) == layer_distance(b, a));

  AffinityMatrix c{DenseMatrix(3, 3), 2};
  CHECK_THROWS_AS(layer_distance(a, c), std::invalid_argument);

  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = affinity_matrix(oracle::to_pattern(oracle::random_bits(16, 10, rng)));
    const auto y = affinity_matrix(oracle::to_pattern(oracle::random_bits(16, 10, rng)));
    CHECK(std::abs(layer_distance(x, y) - oracle::frobenius(x.values, y.values)) < 1e-12);
    CHECK(layer_distance(x, y) < 16.0);  // d_l <= sqrt(m^2 - m) < m
  }
}

TEST_CASE("hierarchical divergence") {
  const DivergenceConfig cfg{1.0};
  CHECK(hierarchical_divergence(make_layer_distances({0.0, 0.0, 0.0}, cfg), cfg) == 0.0);

  const double d = hierarchical_divergence(make_layer_distances({1.0, 0.5, 0.2}, cfg), cfg);
  // Frozen from an independent scalar evaluation of the weighted sum.
  CHECK(std::abs(d - 1.2285657526154072) < 1e-12);
  CHECK(std::abs(d - oracle::hierarchical({1.0, 0.5, 0.2}, 1.0)) < 1e-12);

  for (double beta : {0.1, 1.0, 7.0}) {
    const DivergenceConfig c{beta};
    CHECK(hierarchical_divergence(make_layer_distances({2.5}, c), c) == 2.5);
  }
  CHECK_THROWS_AS(hierarchical_divergence(LayerDistances{}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(make_layer_distances({1.0}, DivergenceConfig{0.0}), std::invalid_argument);
}

TEST_CASE("monotone damping: larger beta never increases D") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 3.0), b(0.01, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> d(1 + rng() % 5);
    for (double& v : d) v = u(rng);
    double b1 = b(rng), b2 = b(rng);
    if (b1 > b2) std::swap(b1, b2);
    const double lo = hierarchical_divergence(make_layer_distances(d, {b1}), {b1});
    const double hi = hierarchical_divergence(make_layer_distances(d, {b2}), {b2});
    CHECK(hi <= lo);
    CHECK(std::abs(lo - oracle::hierarchical(d, b1)) < 1e-12);
  }
}

TEST_CASE("client_divergence: self zero, symmetric, permutation invariant") {
  std::mt19937_64 rng(44);
  const std::vector<std::size_t> sizes = {16, 12, 8, 4};
  const DivergenceConfig cfg{1.0};
  for (int trial = 0; trial < 30; ++trial) {
    const MlpModel a = random_model(sizes, rng);
    const MlpModel b = random_model(sizes, rng);
    const DenseMatrix probe = random_inputs(32, 16, rng);
    CHECK(client_divergence(a, a, probe, cfg) == 0.0);
    const double ab = client_divergence(a, b, probe, cfg);
    CHECK(ab == client_divergence(b, a, probe, cfg));
    CHECK(ab == client_divergence(a, permute_all_hidden(b, rng), probe, cfg));
    CHECK(ab == client_divergence(permute_all_hidden(a, rng), b, probe, cfg));
  }
}

TEST_CASE("D == 0 does not require equal parameters") {
  // Scaling the first layer by c > 0 and the next bias by c scales both
  // hidden pre-activations by c, so no sign changes.
  std::mt19937_64 rng(6);
  const MlpModel a = random_model({5, 6, 4, 2}, rng);
  MlpModel b = a;
  for (double& w : b.layer(0).weights.data()) w *= 3.0;
  for (double& v : b.layer(0).bias) v *= 3.0;
  for (double& v : b.layer(1).bias) v *= 3.0;
  const DenseMatrix probe = random_inputs(20, 5, rng);
  CHECK_FALSE(a == b);
  CHECK(client_divergence(a, b, probe, DivergenceConfig{}) == 0.0);
}

TEST_CASE("client_divergence rejects architecture mismatch") {
  std::mt19937_64 rng(1);
  const MlpModel a = random_model({4, 5, 2}, rng);
  const MlpModel b = random_model({4, 6, 2}, rng);
  CHECK_THROWS_AS(client_divergence(a, b, DenseMatrix(3, 4), DivergenceConfig{}),
                  std::invalid_argument);
}

TEST_CASE("divergence_from_reference matches client_divergence") {
  std::mt19937_64 rng(2);
  const MlpModel g = random_model({8, 10, 6, 3}, rng);
  const MlpModel c = random_model({8, 10, 6, 3}, rng);
  const DenseMatrix probe = random_inputs(24, 8, rng);
  const auto ref = layer_affinities(g, probe);
  CHECK(divergence_from_reference(ref, c, probe, DivergenceConfig{}) ==
        client_divergence(g, c, probe, DivergenceConfig{}));
}
