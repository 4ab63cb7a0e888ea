#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedgeo/config.hpp"
#include "fedgeo/dataset.hpp"
#include "fedgeo/geometry.hpp"
#include "fedgeo/nn.hpp"
#include "fedgeo/partition.hpp"

namespace fedgeo {

struct ClientRecord {
  std::size_t client_id = 0;
  std::size_t n_samples = 0;
  double divergence = 0.0;
  double zscore = 0.0;
  double local_loss = 0.0;
  bool is_shifted = false;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<ClientRecord> clients;  // participating clients, ascending id
  double probe_accuracy = 0.0;        // aggregated model on the probe set
  double eval_accuracy = 0.0;         // aggregated model on the held-out split
  double median = 0.0;
  double mad = 0.0;
  std::vector<std::size_t> flagged;   // z above the anomaly threshold, highest first
  std::uint64_t probe_hash = 0;
};

// Everything fixed before round 0: data, shards, probe, the shifted client's
// perturbed data.
struct ExperimentSetup {
  Dataset train;
  Dataset eval;
  Dataset probe;
  std::vector<std::size_t> probe_indices;  // rows of `eval`
  std::uint64_t probe_hash = 0;
  std::vector<ClientShard> shards;
  std::vector<Dataset> client_data;  // per client, perturbed for the shifted one
  std::optional<std::size_t> shifted_client;
  std::vector<std::size_t> layer_sizes;
};

struct RunOptions {
  unsigned threads = 1;
  bool keep_client_models = false;
  // Dump global and client affinity matrices for (round, client) as CSV.
  std::optional<std::pair<std::size_t, std::size_t>> dump_affinity;
  std::filesystem::path dump_dir = ".";
};

struct LocalTrainResult {
  MlpModel model;
  double mean_loss = 0.0;  // mean mini-batch loss over the last local epoch
};

struct RoundOutcome {
  MlpModel new_global;
  RoundRecord record;
  std::vector<MlpModel> client_models;  // only with RunOptions::keep_client_models
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  MlpModel final_model;
  std::optional<std::size_t> shifted_client;
  std::uint64_t probe_hash = 0;
  std::size_t probe_size = 0;
  double setup_seconds = 0.0;
  double rounds_seconds = 0.0;
};

// Trains a copy of `global` on `local_data` for cfg.local_epochs with fresh
// momentum; mini-batch order is a function of (round_seed, client_id).
LocalTrainResult local_train(const MlpModel& global, const Dataset& local_data,
                             std::size_t client_id, const FedConfig& cfg,
                             std::uint64_t round_seed);

// Same, with the client's data given as a shard of `dataset`.
LocalTrainResult local_train(const MlpModel& global, const ClientShard& shard,
                             const Dataset& dataset, const FedConfig& cfg,
                             std::uint64_t round_seed);

// Sample-count weighted parameter mean.
MlpModel fedavg(std::span<const MlpModel> client_models, std::span<const std::size_t> sample_counts);

// Aggregation weights n_c / sum(n).
std::vector<double> fedavg_weights(std::span<const std::size_t> sample_counts);

ExperimentSetup prepare_experiment(const SimConfig& cfg);

MlpModel initial_global_model(const SimConfig& cfg, const ExperimentSetup& setup);

// Clients participating in `round`, ascending.
std::vector<std::size_t> participants(const SimConfig& cfg, std::size_t round);

// One round: every participant trains from `global`; divergence is measured
// against `global` (pre-aggregation); robust z-scores; FedAvg over every
// participant, flagged or not.
RoundOutcome run_round(const SimConfig& cfg, const ExperimentSetup& setup, const MlpModel& global,
                       std::size_t round, const RunOptions& options = {});

using RoundCallback = std::function<void(const RoundRecord&)>;

ExperimentResult run_experiment(const SimConfig& cfg, const RunOptions& options = {},
                                const RoundCallback& on_round = {});

}  // namespace fedgeo
