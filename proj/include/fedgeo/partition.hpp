#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedgeo {

struct PartitionConfig {
  std::size_t n_clients = 10;
  double alpha = 1.0;  // Dirichlet concentration
  std::uint64_t seed = 0;
};

struct ClientShard {
  std::size_t client_id = 0;
  std::vector<std::size_t> sample_indices;
};

// Label-skewed split. For each class k, proportions p ~ Dir(alpha * 1) over
// clients; the shuffled class-k indices are cut at the cumulative proportions.
// If any shard comes out empty the whole draw is repeated with seed+1.
// Throws std::invalid_argument when there are fewer samples than clients.
std::vector<ClientShard> dirichlet_partition(std::span<const int> labels, std::size_t n_classes,
                                             const PartitionConfig& cfg);

// Mean over shards of the total-variation distance between the shard's label
// histogram and the global one.
double label_skew(std::span<const int> labels, std::size_t n_classes,
                  std::span<const ClientShard> shards);

}  // namespace fedgeo
