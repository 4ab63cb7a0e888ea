#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedgeo/dense_matrix.hpp"
#include "fedgeo/nn.hpp"

namespace fedgeo {

// Binary [rows x cols] matrix, each row packed into 64-bit words (bit j of a
// row lives in word j / 64 at position j % 64; padding bits are zero).
class PatternMatrix {
 public:
  PatternMatrix() = default;
  PatternMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words_per_row() const { return words_per_row_; }

  bool get(std::size_t r, std::size_t c) const {
    return (words_[r * words_per_row_ + c / 64] >> (c % 64)) & 1u;
  }
  void set(std::size_t r, std::size_t c, bool on);

  std::span<const std::uint64_t> row_words(std::size_t r) const {
    return {words_.data() + r * words_per_row_, words_per_row_};
  }

  friend bool operator==(const PatternMatrix&, const PatternMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

// Per hidden layer, bit (i, j) is set iff the preactivation of neuron j on
// probe sample i is strictly positive. The output layer has no entry.
struct ActivationPatternSet {
  std::vector<PatternMatrix> per_layer;

  std::size_t layer_count() const { return per_layer.size(); }
};

// K(i, j) = 1 - Hamming(row_i, row_j) / layer_width.
struct AffinityMatrix {
  DenseMatrix values;
  std::size_t layer_width = 0;
};

struct DivergenceConfig {
  double beta = 1.0;
};

struct LayerDistances {
  std::vector<double> d;
  std::vector<double> lambda;  // exp(-beta * d)
};

using HammingFn = std::size_t (*)(std::span<const std::uint64_t>, std::span<const std::uint64_t>);

// XOR + popcount over packed words.
std::size_t packed_hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

// Hidden-layer activation patterns on the probe inputs.
ActivationPatternSet extract_patterns(const MlpModel& model, const DenseMatrix& probe);

// Pattern bits from a [m x n] preactivation matrix.
PatternMatrix patterns_from_preactivations(const DenseMatrix& z);

// `hamming` is swappable so the verification suite can inject a faulty kernel.
AffinityMatrix affinity_matrix(const PatternMatrix& patterns, HammingFn hamming = packed_hamming);

// Un-normalised Frobenius norm of Ka - Kb.
double layer_distance(const AffinityMatrix& a, const AffinityMatrix& b);

LayerDistances make_layer_distances(std::vector<double> d, const DivergenceConfig& cfg);

// d_1 + sum_{l>=2} (prod_{r<l} lambda_r) d_l over hidden layers.
double hierarchical_divergence(const LayerDistances& dist, const DivergenceConfig& cfg);

std::vector<AffinityMatrix> layer_affinities(const MlpModel& model, const DenseMatrix& probe,
                                             HammingFn hamming = packed_hamming);

LayerDistances layer_distances(std::span<const AffinityMatrix> a, std::span<const AffinityMatrix> b,
                               const DivergenceConfig& cfg);

// Divergence of `client` against precomputed reference affinities (the global
// model's, computed once per round and shared across clients).
double divergence_from_reference(std::span<const AffinityMatrix> reference,
                                 const MlpModel& client, const DenseMatrix& probe,
                                 const DivergenceConfig& cfg, HammingFn hamming = packed_hamming);

double client_divergence(const MlpModel& global_model, const MlpModel& client_model,
                         const DenseMatrix& probe, const DivergenceConfig& cfg,
                         HammingFn hamming = packed_hamming);

}  // namespace fedgeo
