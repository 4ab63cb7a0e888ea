#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedgeo/anomaly.hpp"
#include "fedgeo/geometry.hpp"
#include "fedgeo/partition.hpp"
#include "fedgeo/perturb.hpp"

namespace fedgeo {

struct DataConfig {
  std::string source = "synth";  // "synth" or "idx"
  // idx: training files, and optional held-out files for the probe/eval split.
  std::filesystem::path images;
  std::filesystem::path labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t max_train = 0;  // 0 keeps every training sample
  // synth: generator shape. Also the held-out size when idx has no test files.
  std::size_t n_train = 6000;
  std::size_t n_test = 1000;
  std::size_t dim = 64;
  std::size_t classes = 10;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{128};
};

struct ProbeConfig {
  std::size_t size = 128;
};

struct FedConfig {
  std::size_t n_rounds = 30;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double client_fraction = 1.0;
};

struct AnomalyConfig {
  double epsilon = kDefaultEpsilon;
  double threshold = kDefaultFlagThreshold;
};

struct ShiftedConfig {
  // Either a fixed client index, a random pick (seeded), or nobody.
  std::optional<std::size_t> client;
  bool pick_random = false;
  std::vector<PerturbationSpec> perturbations = {
      {PerturbationKind::gaussian_noise, 0.3, 0},
      {PerturbationKind::rotation, 25.0, 0},
      {PerturbationKind::blur, 1.0, 0},
  };

  bool enabled() const { return client.has_value() || pick_random; }
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  std::string csv = "rounds.csv";
  std::string summary = "summary.json";
};

struct SimConfig {
  std::uint64_t master_seed = 1;
  DataConfig data;
  ModelConfig model;
  PartitionConfig partition;  // partition.seed is derived from master_seed at run time
  ProbeConfig probe;
  FedConfig fed;
  DivergenceConfig divergence;
  AnomalyConfig anomaly;
  ShiftedConfig shifted;
  OutputConfig output;
};

// Every accepted dotted key, in canonical order.
const std::vector<std::string>& config_keys();

// True for keys holding a single scalar (sweepable) value.
bool is_scalar_key(std::string_view key);

// Sets one dotted key from text. Throws ConfigError naming the key on unknown
// keys or unparsable values.
void set_config_value(SimConfig& cfg, std::string_view key, const std::string& value);

// Current value of a dotted key rendered as config text.
std::string get_config_value(const SimConfig& cfg, std::string_view key);

// INI-style text: [section] headers, `key = value` lines, full-line ';' or '#' comments.
// Keys before any section header are rejected. Unknown keys are errors.
SimConfig parse_config(const std::string& text);
SimConfig load_config(const std::filesystem::path& path);

// Throws ConfigError naming the first offending key.
void validate_config(const SimConfig& cfg);

// Round-trippable text form of every effective value.
std::string config_to_text(const SimConfig& cfg);

}  // namespace fedgeo
