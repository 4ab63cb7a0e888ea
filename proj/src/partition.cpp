#include "fedgeo/partition.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace fedgeo {

namespace {

constexpr int kMaxRedraws = 10000;

std::vector<double> sample_dirichlet(std::size_t k, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(k);
  double sum = 0.0;
  for (double& v : p) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // Every draw underflowed (tiny alpha): put all mass on one uniformly chosen client.
    std::fill(p.begin(), p.end(), 0.0);
    p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return p;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<ClientShard> draw_partition(std::span<const int> labels, std::size_t n_classes,
                                        std::size_t n_clients, double alpha, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  }
  std::vector<ClientShard> shards(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c) shards[c].client_id = c;

  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto p = sample_dirichlet(n_clients, alpha, rng);
    const double n_k = static_cast<double>(members.size());
    double cumulative = 0.0;
    std::size_t start = 0;
    for (std::size_t c = 0; c < n_clients; ++c) {
      cumulative += p[c];
      std::size_t end = c + 1 == n_clients
                            ? members.size()
                            : std::min(members.size(), static_cast<std::size_t>(cumulative * n_k));
      end = std::max(end, start);
      shards[c].sample_indices.insert(shards[c].sample_indices.end(),
                                      members.begin() + static_cast<std::ptrdiff_t>(start),
                                      members.begin() + static_cast<std::ptrdiff_t>(end));
      start = end;
    }
  }
  for (auto& shard : shards) std::sort(shard.sample_indices.begin(), shard.sample_indices.end());
  return shards;
}

}  // namespace

std::vector<ClientShard> dirichlet_partition(std::span<const int> labels, std::size_t n_classes,
                                             const PartitionConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("partition alpha must be > 0");
  if (cfg.n_clients < 2) throw std::invalid_argument("partition needs at least 2 clients");
  if (labels.size() < cfg.n_clients) {
    throw std::invalid_argument("cannot give " + std::to_string(cfg.n_clients) +
                                " clients a nonempty shard from " + std::to_string(labels.size()) +
                                " samples");
  }
  std::uint64_t seed = cfg.seed;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt, ++seed) {
    auto shards = draw_partition(labels, n_classes, cfg.n_clients, cfg.alpha, seed);
    const bool all_nonempty = std::all_of(shards.begin(), shards.end(), [](const ClientShard& s) {
      return !s.sample_indices.empty();
    });
    if (all_nonempty) return shards;
  }
  throw std::invalid_argument("dirichlet_partition: no nonempty assignment found after " +
                              std::to_string(kMaxRedraws) + " redraws");
}

double label_skew(std::span<const int> labels, std::size_t n_classes,
                  std::span<const ClientShard> shards) {
  if (shards.empty() || labels.empty()) return 0.0;
  std::vector<double> global(n_classes, 0.0);
  for (int y : labels) global[static_cast<std::size_t>(y)] += 1.0;
  for (double& g : global) g /= static_cast<double>(labels.size());

  double total = 0.0;
  for (const auto& shard : shards) {
    std::vector<double> local(n_classes, 0.0);
    for (std::size_t i : shard.sample_indices) local[static_cast<std::size_t>(labels[i])] += 1.0;
    const double n = static_cast<double>(shard.sample_indices.size());
    double tv = 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      tv += std::abs((n > 0 ? local[k] / n : 0.0) - global[k]);
    }
    total += 0.5 * tv;
  }
  return total / static_cast<double>(shards.size());
}

}  // namespace fedgeo
