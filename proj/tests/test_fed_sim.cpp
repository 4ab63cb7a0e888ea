#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "fedgeo/checkpoint.hpp"
#include "fedgeo/fed_sim.hpp"
#include "fedgeo/geometry.hpp"
#include "fedgeo/nn.hpp"

using namespace fedgeo;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.master_seed = 7;
  cfg.data.n_train = 600;
  cfg.data.n_test = 200;
  cfg.data.dim = 16;
  cfg.data.classes = 4;
  cfg.model.hidden = {16, 8};
  cfg.partition.n_clients = 4;
  cfg.partition.alpha = 1.0;
  cfg.probe.size = 32;
  cfg.fed.n_rounds = 3;
  cfg.fed.batch_size = 32;
  return cfg;
}

MlpModel constant_model(const std::vector<std::size_t>& sizes, double value) {
  MlpModel m = init_model(sizes, 1);
  for (auto& layer : m.layers()) {
    for (double& w : layer.weights.data()) w = value;
    for (double& b : layer.bias) b = value;
  }
  return m;
}

}  // namespace

TEST_CASE("fedavg: identical models are a fixed point") {
  const std::vector<std::size_t> sizes = {3, 4, 2};
  const MlpModel m = init_model(sizes, 3);
  const std::vector<MlpModel> models = {m, m, m};
  const std::vector<std::size_t> counts = {5, 17, 2};
  const MlpModel avg = fedavg(models, counts);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    for (std::size_t k = 0; k < m.layer(l).weights.size(); ++k) {
      CHECK(avg.layer(l).weights.data()[k] == doctest::Approx(m.layer(l).weights.data()[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("fedavg: sample-weighted mean of constant models") {
  const std::vector<std::size_t> sizes = {2, 3, 2};
  const std::vector<MlpModel> equal = {constant_model(sizes, 0.0), constant_model(sizes, 1.0)};
  const std::vector<std::size_t> same = {10, 10};
  const MlpModel half = fedavg(equal, same);
  for (double v : half.layer(0).weights.data()) CHECK(v == doctest::Approx(0.5));

  const std::vector<MlpModel> skewed = {constant_model(sizes, 0.0), constant_model(sizes, 4.0)};
  const std::vector<std::size_t> counts = {1, 3};
  const MlpModel avg = fedavg(skewed, counts);
  for (const auto& layer : avg.layers()) {
    for (double v : layer.weights.data()) CHECK(v == doctest::Approx(3.0));
    for (double v : layer.bias) CHECK(v == doctest::Approx(3.0));
  }
}

TEST_CASE("fedavg weights sum to one") {
  const std::vector<std::size_t> counts = {1, 7, 123, 4000, 3};
  const auto w = fedavg_weights(counts);
  CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
  CHECK(w[2] == doctest::Approx(123.0 / 4134.0));
  const std::vector<std::size_t> none;
  CHECK_THROWS(fedavg_weights(none));
  const std::vector<std::size_t> zeros = {0, 0};
  CHECK_THROWS(fedavg_weights(zeros));
}

TEST_CASE("fedavg rejects mismatched architectures") {
  const std::vector<std::size_t> a = {2, 3, 2};
  const std::vector<std::size_t> b = {2, 4, 2};
  const std::vector<MlpModel> models = {init_model(a, 1), init_model(b, 1)};
  const std::vector<std::size_t> counts = {1, 1};
  CHECK_THROWS(fedavg(models, counts));
}

TEST_CASE("local_train: zero learning rate leaves the model unchanged") {
  const auto ds = synth_dataset(100, 8, 4, 1);
  const std::vector<std::size_t> sizes = {8, 8, 4};
  const MlpModel global = init_model(sizes, 2);
  FedConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK(local_train(global, ds, 0, cfg, 9).model == global);
}

TEST_CASE("local_train is deterministic per (round seed, client)") {
  const auto ds = synth_dataset(100, 8, 4, 1);
  const std::vector<std::size_t> sizes = {8, 8, 4};
  const MlpModel global = init_model(sizes, 2);
  const FedConfig cfg;
  const auto a = local_train(global, ds, 3, cfg, 9);
  const auto b = local_train(global, ds, 3, cfg, 9);
  CHECK(a.model == b.model);
  CHECK(a.mean_loss == b.mean_loss);
  CHECK_FALSE(local_train(global, ds, 4, cfg, 9).model == a.model);
  CHECK_FALSE(a.model == global);
}

TEST_CASE("local_train rejects an empty shard") {
  const auto ds = synth_dataset(100, 8, 4, 1);
  const std::vector<std::size_t> sizes = {8, 8, 4};
  const MlpModel global = init_model(sizes, 2);
  const ClientShard empty{0, {}};
  CHECK_THROWS(local_train(global, empty, ds, FedConfig{}, 1));
}

TEST_CASE("run_round with zero learning rate: every divergence and z is zero") {
  SimConfig cfg = small_config();
  cfg.fed.learning_rate = 0.0;
  const auto setup = prepare_experiment(cfg);
  const MlpModel global = initial_global_model(cfg, setup);
  const auto out = run_round(cfg, setup, global, 0);
  REQUIRE(out.record.clients.size() == cfg.partition.n_clients);
  for (const auto& c : out.record.clients) {
    CHECK(c.divergence == 0.0);
    CHECK(c.zscore == 0.0);
  }
  CHECK(out.record.flagged.empty());
  CHECK(out.new_global == global);
}

TEST_CASE("run_round with training: positive divergences, one row per client") {
  const SimConfig cfg = small_config();
  const auto setup = prepare_experiment(cfg);
  const auto out = run_round(cfg, setup, initial_global_model(cfg, setup), 0);
  REQUIRE(out.record.clients.size() == 4);
  std::size_t total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(out.record.clients[i].client_id == i);
    CHECK(out.record.clients[i].divergence > 0.0);
    CHECK(std::isfinite(out.record.clients[i].zscore));
    total += out.record.clients[i].n_samples;
  }
  CHECK(total == setup.train.size());
  CHECK(out.record.probe_hash == setup.probe_hash);
}

TEST_CASE("identical shards give identical divergences and zero z-scores") {
  SimConfig cfg = small_config();
  auto setup = prepare_experiment(cfg);
  for (auto& d : setup.client_data) d = setup.client_data[0];
  for (auto& s : setup.shards) s.sample_indices = setup.shards[0].sample_indices;
  // Batch order depends on the client id, so one local step over the whole
  // shard removes the only source of difference.
  cfg.fed.batch_size = setup.client_data[0].size();
  const auto out = run_round(cfg, setup, initial_global_model(cfg, setup), 0);
  const double d0 = out.record.clients[0].divergence;
  for (const auto& c : out.record.clients) {
    CHECK(std::abs(c.divergence - d0) < 1e-9);
    CHECK(std::abs(c.zscore) < 1e-6);
  }
}

TEST_CASE("divergence recomputed from checkpoints matches the logged value") {
  const SimConfig cfg = small_config();
  const auto setup = prepare_experiment(cfg);
  RunOptions opts;
  opts.keep_client_models = true;
  MlpModel global = initial_global_model(cfg, setup);
  const auto r0 = run_round(cfg, setup, global, 0, opts);
  global = r0.new_global;
  const auto r1 = run_round(cfg, setup, global, 1, opts);
  REQUIRE(r1.client_models.size() == 4);

  const auto dir = std::filesystem::temp_directory_path() / "fedgeo_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "global.bin", global);
  save_checkpoint(dir / "client2.bin", r1.client_models[2]);
  const MlpModel g = load_checkpoint(dir / "global.bin");
  const MlpModel c = load_checkpoint(dir / "client2.bin");
  std::filesystem::remove_all(dir);

  const double d = client_divergence(g, c, setup.probe.images, cfg.divergence);
  CHECK(std::abs(d - r1.record.clients[2].divergence) < 1e-9);
}

TEST_CASE("thread count does not change results") {
  SimConfig cfg = small_config();
  RunOptions one;
  RunOptions many;
  many.threads = 4;
  const auto a = run_experiment(cfg, one);
  const auto b = run_experiment(cfg, many);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    for (std::size_t i = 0; i < a.records[r].clients.size(); ++i) {
      CHECK(a.records[r].clients[i].divergence == b.records[r].clients[i].divergence);
    }
  }
  CHECK(a.final_model == b.final_model);
}

TEST_CASE("probe set is fixed for the whole run") {
  const SimConfig cfg = small_config();
  const auto res = run_experiment(cfg);
  REQUIRE(res.records.size() == 3);
  for (const auto& r : res.records) CHECK(r.probe_hash == res.probe_hash);
  CHECK(res.probe_size == 32);
}

TEST_CASE("shifted client: perturbed data, flagged in records") {
  SimConfig cfg = small_config();
  cfg.shifted.client = 1;
  const auto setup = prepare_experiment(cfg);
  REQUIRE(setup.shifted_client == std::optional<std::size_t>(1));
  const auto plain = setup.train.subset(setup.shards[1].sample_indices);
  CHECK_FALSE(plain.images == setup.client_data[1].images);
  CHECK(plain.labels == setup.client_data[1].labels);
  const auto out = run_round(cfg, setup, initial_global_model(cfg, setup), 0);
  for (const auto& c : out.record.clients) CHECK(c.is_shifted == (c.client_id == 1));
}

TEST_CASE("partial participation selects a stable, sorted subset") {
  SimConfig cfg = small_config();
  cfg.partition.n_clients = 10;
  cfg.fed.client_fraction = 0.3;
  const auto p = participants(cfg, 4);
  CHECK(p.size() == 3);
  CHECK(std::is_sorted(p.begin(), p.end()));
  CHECK(participants(cfg, 4) == p);
}
