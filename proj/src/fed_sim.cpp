#include "fedgeo/fed_sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "fedgeo/anomaly.hpp"
#include "fedgeo/errors.hpp"
#include "fedgeo/perturb.hpp"
#include "fedgeo/seeds.hpp"

namespace fedgeo {

namespace {

// Runs fn(0..n-1) on up to `threads` workers; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

std::size_t image_side(std::size_t dim) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) {
    throw ConfigError("config key 'shifted.perturbations': input width " + std::to_string(dim) +
                      " is not a square image");
  }
  return side;
}

std::pair<Dataset, Dataset> load_split(const SimConfig& cfg) {
  const auto& d = cfg.data;
  if (d.source == "synth") {
    const Dataset all = synth_dataset(d.n_train + d.n_test, d.dim, d.classes,
                                      derive_seed(cfg.master_seed, "data"));
    return split_dataset(all, d.n_train);
  }
  Dataset train = load_idx_dataset(d.images, d.labels);
  Dataset eval;
  if (!d.test_images.empty()) {
    eval = load_idx_dataset(d.test_images, d.test_labels);
    if (eval.dim() != train.dim()) throw DataError("train and test image sizes differ");
  } else {
    if (train.size() <= d.n_test) throw DataError("training file too small to hold out data.n_test");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.master_seed, "holdout"));
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<std::size_t> held(order.end() - static_cast<std::ptrdiff_t>(d.n_test),
                                        order.end());
    order.resize(order.size() - d.n_test);
    std::sort(order.begin(), order.end());
    eval = train.subset(held);
    train = train.subset(order);
  }
  if (d.max_train > 0 && d.max_train < train.size()) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.master_seed, "subsample"));
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(d.max_train);
    std::sort(order.begin(), order.end());
    train = train.subset(order);
  }
  const std::size_t n_classes = std::max(train.n_classes, eval.n_classes);
  train.n_classes = eval.n_classes = n_classes;
  return {std::move(train), std::move(eval)};
}

}  // namespace

LocalTrainResult local_train(const MlpModel& global, const Dataset& local_data,
                             std::size_t client_id, const FedConfig& cfg,
                             std::uint64_t round_seed) {
  if (local_data.size() == 0) {
    throw std::invalid_argument("local_train: client " + std::to_string(client_id) +
                                " has no samples");
  }
  if (cfg.local_epochs == 0) throw std::invalid_argument("local_train: local_epochs must be >= 1");
  if (cfg.batch_size == 0) throw std::invalid_argument("local_train: batch_size must be >= 1");
  LocalTrainResult result{global, 0.0};
  SgdState state = make_sgd_state(global, cfg.learning_rate, cfg.momentum);
  std::mt19937_64 rng(derive_seed(round_seed, "shuffle", client_id));
  std::vector<std::size_t> order(local_data.size());
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<int> labels;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const DenseMatrix x = gather_rows(local_data.images, rows);
      labels.clear();
      for (std::size_t r : rows) labels.push_back(local_data.labels[r]);
      auto lg = loss_and_gradients(result.model, x, labels);
      sgd_step(result.model, lg.grads, state);
      loss_sum += lg.loss;
      ++batches;
    }
    result.mean_loss = loss_sum / static_cast<double>(batches);
  }
  return result;
}

LocalTrainResult local_train(const MlpModel& global, const ClientShard& shard,
                             const Dataset& dataset, const FedConfig& cfg,
                             std::uint64_t round_seed) {
  return local_train(global, dataset.subset(shard.sample_indices), shard.client_id, cfg,
                     round_seed);
}

std::vector<double> fedavg_weights(std::span<const std::size_t> sample_counts) {
  if (sample_counts.empty()) throw std::invalid_argument("fedavg: no sample counts");
  double total = 0.0;
  for (std::size_t n : sample_counts) {
    if (n == 0) throw std::invalid_argument("fedavg: sample counts must be positive");
    total += static_cast<double>(n);
  }
  std::vector<double> w;
  w.reserve(sample_counts.size());
  for (std::size_t n : sample_counts) w.push_back(static_cast<double>(n) / total);
  return w;
}

MlpModel fedavg(std::span<const MlpModel> client_models, std::span<const std::size_t> sample_counts) {
  if (client_models.empty()) throw std::invalid_argument("fedavg: no client models");
  if (client_models.size() != sample_counts.size()) {
    throw std::invalid_argument("fedavg: model/count length mismatch");
  }
  for (const auto& m : client_models) {
    if (!m.same_architecture(client_models.front())) {
      throw std::invalid_argument("fedavg: architecture mismatch");
    }
  }
  const auto w = fedavg_weights(sample_counts);
  // theta_0 + sum_c w_c (theta_c - theta_0): exact when all clients agree.
  MlpModel out = client_models.front();
  for (std::size_t l = 0; l < out.layer_count(); ++l) {
    auto& ow = out.layer(l).weights.data();
    auto& ob = out.layer(l).bias;
    const auto& base_w = client_models.front().layer(l).weights.data();
    const auto& base_b = client_models.front().layer(l).bias;
    for (std::size_t c = 1; c < client_models.size(); ++c) {
      const auto& cw = client_models[c].layer(l).weights.data();
      const auto& cb = client_models[c].layer(l).bias;
      for (std::size_t k = 0; k < ow.size(); ++k) ow[k] += w[c] * (cw[k] - base_w[k]);
      for (std::size_t k = 0; k < ob.size(); ++k) ob[k] += w[c] * (cb[k] - base_b[k]);
    }
  }
  return out;
}

ExperimentSetup prepare_experiment(const SimConfig& cfg) {
  validate_config(cfg);
  ExperimentSetup setup;
  std::tie(setup.train, setup.eval) = load_split(cfg);
  const std::size_t n_classes = setup.train.n_classes;

  try {
    setup.probe_indices = select_probe_indices(setup.eval.labels, n_classes, cfg.probe.size,
                                               derive_seed(cfg.master_seed, "probe"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'probe.size': ") + e.what());
  }
  setup.probe = setup.eval.subset(setup.probe_indices);
  setup.probe_hash = hash_indices(setup.probe_indices);

  PartitionConfig pcfg = cfg.partition;
  pcfg.seed = derive_seed(cfg.master_seed, "partition");
  try {
    setup.shards = dirichlet_partition(setup.train.labels, n_classes, pcfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'partition.n_clients': ") + e.what());
  }

  if (cfg.shifted.pick_random) {
    std::mt19937_64 rng(derive_seed(cfg.master_seed, "shift-pick"));
    setup.shifted_client =
        std::uniform_int_distribution<std::size_t>(0, cfg.partition.n_clients - 1)(rng);
  } else {
    setup.shifted_client = cfg.shifted.client;
  }

  setup.client_data.reserve(setup.shards.size());
  for (const auto& shard : setup.shards) {
    setup.client_data.push_back(setup.train.subset(shard.sample_indices));
  }
  if (setup.shifted_client && !cfg.shifted.perturbations.empty()) {
    auto specs = cfg.shifted.perturbations;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      specs[i].seed = derive_seed(cfg.master_seed, "perturb", i);
    }
    auto& data = setup.client_data[*setup.shifted_client];
    data.images = apply_perturbations(data.images, specs, image_side(data.dim()));
  }

  setup.layer_sizes.push_back(setup.train.dim());
  setup.layer_sizes.insert(setup.layer_sizes.end(), cfg.model.hidden.begin(),
                           cfg.model.hidden.end());
  setup.layer_sizes.push_back(n_classes);
  return setup;
}

MlpModel initial_global_model(const SimConfig& cfg, const ExperimentSetup& setup) {
  return init_model(setup.layer_sizes, derive_seed(cfg.master_seed, "init"));
}

std::vector<std::size_t> participants(const SimConfig& cfg, std::size_t round) {
  const std::size_t n = cfg.partition.n_clients;
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  if (cfg.fed.client_fraction >= 1.0) return ids;
  const auto k = static_cast<std::size_t>(
      std::llround(cfg.fed.client_fraction * static_cast<double>(n)));
  std::mt19937_64 rng(derive_seed(cfg.master_seed, "participation", round));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::clamp<std::size_t>(k, 1, n));
  std::sort(ids.begin(), ids.end());
  return ids;
}

RoundOutcome run_round(const SimConfig& cfg, const ExperimentSetup& setup, const MlpModel& global,
                       std::size_t round, const RunOptions& options) {
  const auto ids = participants(cfg, round);
  const auto global_k = layer_affinities(global, setup.probe.images);
  const std::uint64_t round_seed = derive_seed(cfg.master_seed, "round", round);

  std::vector<MlpModel> models(ids.size());
  std::vector<double> divergences(ids.size());
  std::vector<double> losses(ids.size());
  parallel_for(ids.size(), options.threads, [&](std::size_t i) {
    const std::size_t c = ids[i];
    auto trained = local_train(global, setup.client_data[c], c, cfg.fed, round_seed);
    if (!trained.model.all_finite() || !std::isfinite(trained.mean_loss)) {
      throw NumericError("non-finite parameters after local training (round " +
                         std::to_string(round) + ", client " + std::to_string(c) + ")");
    }
    divergences[i] =
        divergence_from_reference(global_k, trained.model, setup.probe.images, cfg.divergence);
    if (!std::isfinite(divergences[i])) {
      throw NumericError("non-finite divergence (round " + std::to_string(round) + ", client " +
                         std::to_string(c) + ")");
    }
    losses[i] = trained.mean_loss;
    models[i] = std::move(trained.model);
  });

  const RoundScores scores = robust_scores(divergences, cfg.anomaly.epsilon, round);

  RoundOutcome outcome;
  auto& rec = outcome.record;
  rec.round = round;
  rec.median = scores.median;
  rec.mad = scores.mad;
  rec.probe_hash = hash_indices(setup.probe_indices);
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t c = ids[i];
    counts.push_back(setup.client_data[c].size());
    rec.clients.push_back(ClientRecord{c, counts.back(), divergences[i], scores.zscores[i],
                                       losses[i], setup.shifted_client == c});
  }
  for (std::size_t i : flag_outliers(scores, cfg.anomaly.threshold)) rec.flagged.push_back(ids[i]);

  if (options.dump_affinity && options.dump_affinity->first == round) {
    const std::size_t target = options.dump_affinity->second;
    const auto it = std::find(ids.begin(), ids.end(), target);
    if (it != ids.end()) {
      const auto client_k = layer_affinities(models[static_cast<std::size_t>(it - ids.begin())],
                                             setup.probe.images);
      std::filesystem::create_directories(options.dump_dir);
      for (std::size_t l = 0; l < client_k.size(); ++l) {
        const std::string stem = "affinity_r" + std::to_string(round);
        write_matrix_csv(options.dump_dir / (stem + "_global_layer" + std::to_string(l + 1) + ".csv"),
                         global_k[l].values);
        write_matrix_csv(options.dump_dir / (stem + "_c" + std::to_string(target) + "_layer" +
                                             std::to_string(l + 1) + ".csv"),
                         client_k[l].values);
      }
    }
  }

  outcome.new_global = fedavg(models, counts);
  if (!outcome.new_global.all_finite()) {
    throw NumericError("non-finite parameters after aggregation (round " + std::to_string(round) + ")");
  }
  rec.probe_accuracy = accuracy(outcome.new_global, setup.probe.images, setup.probe.labels);
  rec.eval_accuracy = accuracy(outcome.new_global, setup.eval.images, setup.eval.labels);
  if (options.keep_client_models) outcome.client_models = std::move(models);
  return outcome;
}

ExperimentResult run_experiment(const SimConfig& cfg, const RunOptions& options,
                                const RoundCallback& on_round) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const ExperimentSetup setup = prepare_experiment(cfg);
  MlpModel global = initial_global_model(cfg, setup);
  const auto t1 = clock::now();

  ExperimentResult result;
  result.shifted_client = setup.shifted_client;
  result.probe_hash = setup.probe_hash;
  result.probe_size = setup.probe_indices.size();
  for (std::size_t t = 0; t < cfg.fed.n_rounds; ++t) {
    auto outcome = run_round(cfg, setup, global, t, options);
    if (outcome.record.probe_hash != setup.probe_hash) {
      throw std::logic_error("probe set changed between rounds");
    }
    global = std::move(outcome.new_global);
    if (on_round) on_round(outcome.record);
    result.records.push_back(std::move(outcome.record));
  }
  result.final_model = std::move(global);
  const auto t2 = clock::now();
  result.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  result.rounds_seconds = std::chrono::duration<double>(t2 - t1).count();
  return result;
}

}  // namespace fedgeo
