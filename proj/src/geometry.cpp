#include "fedgeo/geometry.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedgeo {

PatternMatrix::PatternMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_per_row_((cols + 63) / 64), words_(rows * words_per_row_, 0) {}

void PatternMatrix::set(std::size_t r, std::size_t c, bool on) {
  auto& w = words_[r * words_per_row_ + c / 64];
  const std::uint64_t mask = std::uint64_t{1} << (c % 64);
  w = on ? (w | mask) : (w & ~mask);
}

std::size_t packed_hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::size_t h = 0;
  for (std::size_t k = 0; k < a.size(); ++k) h += static_cast<std::size_t>(std::popcount(a[k] ^ b[k]));
  return h;
}

PatternMatrix patterns_from_preactivations(const DenseMatrix& z) {
  PatternMatrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) {
      if (z(i, j) > 0.0) p.set(i, j, true);
    }
  }
  return p;
}

ActivationPatternSet extract_patterns(const MlpModel& model, const DenseMatrix& probe) {
  const ForwardTrace trace = forward(model, probe);
  ActivationPatternSet set;
  set.per_layer.reserve(model.hidden_layer_count());
  for (std::size_t l = 0; l < model.hidden_layer_count(); ++l) {
    set.per_layer.push_back(patterns_from_preactivations(trace.preactivations[l]));
  }
  return set;
}

AffinityMatrix affinity_matrix(const PatternMatrix& patterns, HammingFn hamming) {
  if (patterns.rows() == 0 || patterns.cols() == 0) {
    throw std::invalid_argument("affinity_matrix: empty pattern matrix");
  }
  const std::size_t m = patterns.rows();
  const double width = static_cast<double>(patterns.cols());
  AffinityMatrix k{DenseMatrix(m, m), patterns.cols()};
  for (std::size_t i = 0; i < m; ++i) {
    k.values(i, i) = 1.0 - static_cast<double>(hamming(patterns.row_words(i), patterns.row_words(i))) / width;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double v =
          1.0 - static_cast<double>(hamming(patterns.row_words(i), patterns.row_words(j))) / width;
      k.values(i, j) = v;
      k.values(j, i) = v;
    }
  }
  return k;
}

double layer_distance(const AffinityMatrix& a, const AffinityMatrix& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols() ||
      a.layer_width != b.layer_width) {
    throw std::invalid_argument("layer_distance: affinity shapes differ");
  }
  double acc = 0.0;
  const auto& x = a.values.data();
  const auto& y = b.values.data();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

LayerDistances make_layer_distances(std::vector<double> d, const DivergenceConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("divergence beta must be > 0");
  LayerDistances out;
  out.lambda.reserve(d.size());
  for (double v : d) {
    if (!(v >= 0.0)) throw std::invalid_argument("layer distance must be >= 0");
    out.lambda.push_back(std::exp(-cfg.beta * v));
  }
  out.d = std::move(d);
  return out;
}

double hierarchical_divergence(const LayerDistances& dist, const DivergenceConfig& cfg) {
  if (dist.d.empty()) throw std::invalid_argument("hierarchical_divergence: no layers");
  if (dist.lambda.size() != dist.d.size()) {
    throw std::invalid_argument("hierarchical_divergence: lambda/d length mismatch");
  }
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("divergence beta must be > 0");
  double total = dist.d[0];
  double weight = 1.0;
  for (std::size_t l = 1; l < dist.d.size(); ++l) {
    weight *= dist.lambda[l - 1];
    total += weight * dist.d[l];
  }
  return total;
}

std::vector<AffinityMatrix> layer_affinities(const MlpModel& model, const DenseMatrix& probe,
                                             HammingFn hamming) {
  const auto patterns = extract_patterns(model, probe);
  std::vector<AffinityMatrix> out;
  out.reserve(patterns.layer_count());
  for (const auto& p : patterns.per_layer) out.push_back(affinity_matrix(p, hamming));
  return out;
}

LayerDistances layer_distances(std::span<const AffinityMatrix> a, std::span<const AffinityMatrix> b,
                               const DivergenceConfig& cfg) {
  if (a.size() != b.size()) throw std::invalid_argument("layer_distances: layer count mismatch");
  std::vector<double> d;
  d.reserve(a.size());
  for (std::size_t l = 0; l < a.size(); ++l) d.push_back(layer_distance(a[l], b[l]));
  return make_layer_distances(std::move(d), cfg);
}

double divergence_from_reference(std::span<const AffinityMatrix> reference,
                                 const MlpModel& client, const DenseMatrix& probe,
                                 const DivergenceConfig& cfg, HammingFn hamming) {
  const auto client_k = layer_affinities(client, probe, hamming);
  return hierarchical_divergence(layer_distances(reference, client_k, cfg), cfg);
}

double client_divergence(const MlpModel& global_model, const MlpModel& client_model,
                         const DenseMatrix& probe, const DivergenceConfig& cfg,
                         HammingFn hamming) {
  if (!global_model.same_architecture(client_model)) {
    throw std::invalid_argument("client_divergence: architecture mismatch");
  }
  const auto global_k = layer_affinities(global_model, probe, hamming);
  return divergence_from_reference(global_k, client_model, probe, cfg, hamming);
}

}  // namespace fedgeo
