#include "fedgeo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "fedgeo/anomaly.hpp"
#include "fedgeo/nn.hpp"

namespace fedgeo {

namespace {

CheckResult check(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, std::move(detail)};
}

PatternMatrix pattern_from_rows(const std::vector<std::vector<int>>& rows) {
  PatternMatrix p(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) p.set(i, j, rows[i][j] != 0);
  }
  return p;
}

PatternMatrix random_pattern(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  PatternMatrix p(rows, cols);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) p.set(i, j, coin(rng));
  }
  return p;
}

double naive_affinity(const PatternMatrix& p, std::size_t i, std::size_t j) {
  std::size_t h = 0;
  for (std::size_t c = 0; c < p.cols(); ++c) h += p.get(i, c) != p.get(j, c) ? 1 : 0;
  return 1.0 - static_cast<double>(h) / static_cast<double>(p.cols());
}

DenseMatrix random_inputs(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

MlpModel random_model(const std::vector<std::size_t>& sizes, std::mt19937_64& rng) {
  MlpModel m = init_model(sizes, rng());
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& layer : m.layers()) {
    for (double& b : layer.bias) b = u(rng);
  }
  return m;
}

double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CheckResult check_affinity_hand_cases(HammingFn hamming) {
  const auto k = affinity_matrix(pattern_from_rows({{1, 0, 1, 1}, {1, 1, 0, 1}, {0, 1, 0, 0}}), hamming);
  const bool ok = k.values(0, 1) == 0.5 && k.values(1, 0) == 0.5 && k.values(0, 0) == 1.0 &&
                  k.values(0, 2) == 0.0;
  return check("affinity hand cases (K=0.5, K=1 self, K=0 complement)", ok);
}

CheckResult check_frobenius_hand_case() {
  AffinityMatrix a{DenseMatrix(2, 2, std::vector<double>{1.0, 0.5, 0.5, 1.0}), 2};
  AffinityMatrix b{DenseMatrix(2, 2, std::vector<double>{1.0, 0.0, 0.0, 1.0}), 2};
  const double d = layer_distance(a, b);
  return check("frobenius hand case sqrt(0.5)", std::abs(d - std::sqrt(0.5)) < 1e-15);
}

CheckResult check_hierarchical_hand_case() {
  DivergenceConfig cfg{1.0};
  const double got = hierarchical_divergence(make_layer_distances({1.0, 0.5, 0.2}, cfg), cfg);
  const double expected = 1.0 + std::exp(-1.0) * 0.5 + std::exp(-1.0) * std::exp(-0.5) * 0.2;
  std::ostringstream detail;
  detail.precision(17);
  detail << "D=" << got;
  return check("hierarchical divergence d=[1,0.5,0.2] beta=1", std::abs(got - expected) < 1e-12,
               detail.str());
}

CheckResult check_zscore_hand_case() {
  const std::vector<double> d = {1.0, 1.1, 0.9, 1.05, 5.0};
  const auto s = robust_scores(d, 1e-8);
  const bool ok = std::abs(s.median - 1.05) < 1e-12 && std::abs(s.mad - 0.05) < 1e-12 &&
                  std::abs(s.zscores[4] - 79.0) / 79.0 < 1e-5 &&
                  flag_outliers(s, 3.5) == std::vector<std::size_t>{4};
  std::ostringstream detail;
  detail.precision(10);
  detail << "z=" << s.zscores[4];
  return check("robust z-score hand case (z=79)", ok, detail.str());
}

CheckResult check_packed_vs_naive(HammingFn hamming) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> rows(1, 32), cols(1, 64);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_pattern(rows(rng), cols(rng), rng);
    const auto k = affinity_matrix(p, hamming);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      for (std::size_t j = 0; j < p.rows(); ++j) {
        if (k.values(i, j) != naive_affinity(p, i, j)) {
          return check("packed vs naive affinity (200 matrices)", false,
                       "mismatch in trial " + std::to_string(trial));
        }
      }
    }
  }
  return check("packed vs naive affinity (200 matrices)", true);
}

CheckResult check_gradients() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MlpModel model = random_model({4, 5, 3}, rng);
    const DenseMatrix x = random_inputs(8, 4, rng);
    std::vector<int> y(8);
    for (int& v : y) v = static_cast<int>(rng() % 3);
    const auto analytic = loss_and_gradients(model, x, y).grads;
    const double h = 1e-5;
    auto probe = [&](double& param, double g) {
      const double saved = param;
      param = saved + h;
      const double up = loss(model, x, y);
      param = saved - h;
      const double down = loss(model, x, y);
      param = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(g), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(g - numeric) / denom);
    };
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      auto& w = model.layer(l).weights.data();
      for (std::size_t k = 0; k < w.size(); ++k) probe(w[k], analytic[l].weights.data()[k]);
      auto& b = model.layer(l).bias;
      for (std::size_t k = 0; k < b.size(); ++k) probe(b[k], analytic[l].bias[k]);
    }
  }
  std::ostringstream detail;
  detail << "max rel err=" << worst;
  return check("gradient check [4,5,3] x20", worst < 1e-4, detail.str());
}

CheckResult check_permutation_invariance(HammingFn hamming) {
  std::mt19937_64 rng(7);
  const std::vector<std::size_t> sizes = {16, 12, 8, 4};
  const DivergenceConfig cfg{1.0};
  for (int trial = 0; trial < 100; ++trial) {
    const MlpModel global = random_model(sizes, rng);
    const MlpModel client = random_model(sizes, rng);
    const DenseMatrix probe = random_inputs(32, 16, rng);
    MlpModel permuted = client;
    for (std::size_t l = 0; l + 1 < sizes.size() - 1; ++l) {
      std::vector<std::size_t> perm(sizes[l + 1]);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      permuted = permute_hidden_layer(permuted, l, perm);
    }
    const double d0 = client_divergence(global, client, probe, cfg, hamming);
    const double d1 = client_divergence(global, permuted, probe, cfg, hamming);
    if (d0 != d1) {
      return check("permutation invariance [16,12,8,4] x100", false,
                   "trial " + std::to_string(trial) + " changed D");
    }
  }
  return check("permutation invariance [16,12,8,4] x100", true);
}

CheckResult check_self_divergence(HammingFn hamming) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const MlpModel m = random_model({16, 12, 8, 4}, rng);
    const DenseMatrix probe = random_inputs(32, 16, rng);
    if (client_divergence(m, m, probe, DivergenceConfig{1.0}, hamming) != 0.0) {
      return check("self-divergence zero x50", false, "trial " + std::to_string(trial));
    }
  }
  return check("self-divergence zero x50", true);
}

CheckResult check_median_mad() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> size(2, 12);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<int> small(0, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(size(rng));
    // Every other trial draws from a tiny set so ties are exercised.
    for (double& x : v) x = trial % 2 ? u(rng) : static_cast<double>(small(rng));
    const double med = sorted_median(v);
    std::vector<double> dev;
    for (double x : v) dev.push_back(std::abs(x - med));
    const double mad = sorted_median(dev);
    const auto s = robust_scores(v, 1e-8);
    if (s.median != med || s.mad != mad) {
      return check("median/MAD vs sort reference x1000", false, "trial " + std::to_string(trial));
    }
  }
  return check("median/MAD vs sort reference x1000", true);
}

}  // namespace

MlpModel permute_hidden_layer(const MlpModel& model, std::size_t layer,
                              const std::vector<std::size_t>& permutation) {
  if (layer + 1 >= model.layer_count()) {
    throw std::invalid_argument("permute_hidden_layer: not a hidden layer");
  }
  const auto& cur = model.layer(layer);
  const auto& next = model.layer(layer + 1);
  if (permutation.size() != cur.fan_out()) {
    throw std::invalid_argument("permute_hidden_layer: permutation size mismatch");
  }
  MlpModel out = model;
  auto& oc = out.layer(layer);
  auto& on = out.layer(layer + 1);
  // New neuron j is old neuron permutation[j].
  for (std::size_t j = 0; j < permutation.size(); ++j) {
    const std::size_t src = permutation[j];
    for (std::size_t i = 0; i < cur.fan_in(); ++i) oc.weights(i, j) = cur.weights(i, src);
    oc.bias[j] = cur.bias[src];
    for (std::size_t k = 0; k < next.fan_out(); ++k) on.weights(j, k) = next.weights(src, k);
  }
  return out;
}

std::vector<CheckResult> run_verification(HammingFn hamming) {
  return {
      check_affinity_hand_cases(hamming),
      check_frobenius_hand_case(),
      check_hierarchical_hand_case(),
      check_zscore_hand_case(),
      check_packed_vs_naive(hamming),
      check_gradients(),
      check_permutation_invariance(hamming),
      check_self_divergence(hamming),
      check_median_mad(),
  };
}

bool report_verification(std::ostream& out, const std::vector<CheckResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name;
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    out << '\n';
    all = all && r.passed;
  }
  return all;
}

}  // namespace fedgeo
