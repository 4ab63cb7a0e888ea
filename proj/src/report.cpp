#include "fedgeo/report.hpp"

#include <cstdio>
#include <ostream>

namespace fedgeo {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv_header(std::ostream& out) { out << kRoundCsvHeader << '\n'; }

void write_csv_rows(std::ostream& out, const RoundRecord& record) {
  for (const auto& c : record.clients) {
    out << record.round << ',' << c.client_id << ',' << c.n_samples << ','
        << format_double(c.divergence) << ',' << format_double(c.zscore) << ','
        << format_double(c.local_loss) << ',' << (c.is_shifted ? 1 : 0) << ','
        << format_double(record.median) << ',' << format_double(record.mad) << ','
        << format_double(record.probe_accuracy) << '\n';
  }
}

nlohmann::json config_to_json(const SimConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& key : config_keys()) {
    const auto dot = key.find('.');
    j[key.substr(0, dot)][key.substr(dot + 1)] = get_config_value(cfg, key);
  }
  // Typed copies of the knobs most often compared across runs.
  j["partition"]["alpha"] = cfg.partition.alpha;
  j["partition"]["n_clients"] = cfg.partition.n_clients;
  j["divergence"]["beta"] = cfg.divergence.beta;
  j["probe"]["size"] = cfg.probe.size;
  j["run"]["master_seed"] = cfg.master_seed;
  return j;
}

std::vector<double> max_z_fractions(const std::vector<RoundRecord>& records, std::size_t n_clients,
                                    std::size_t first_round) {
  std::vector<double> wins(n_clients, 0.0);
  std::size_t considered = 0;
  for (const auto& rec : records) {
    if (rec.round < first_round || rec.clients.empty()) continue;
    ++considered;
    const ClientRecord* best = &rec.clients.front();
    for (const auto& c : rec.clients) {
      if (c.zscore > best->zscore) best = &c;
    }
    wins[best->client_id] += 1.0;
  }
  if (considered > 0) {
    for (double& w : wins) w /= static_cast<double>(considered);
  }
  return wins;
}

nlohmann::json build_summary(const SimConfig& cfg, const ExperimentResult& result) {
  using nlohmann::json;
  const std::size_t n_clients = cfg.partition.n_clients;
  json s;
  s["config"] = config_to_json(cfg);
  s["probe"] = {{"size", result.probe_size}, {"index_hash", result.probe_hash}};
  s["shifted_client"] = result.shifted_client ? json(*result.shifted_client) : json(nullptr);

  json trajectories = json::array();
  json flagged_counts = json::array();
  std::vector<std::size_t> flags(n_clients, 0);
  for (std::size_t c = 0; c < n_clients; ++c) {
    json series = json::array();
    for (const auto& rec : result.records) {
      json value = nullptr;
      for (const auto& cr : rec.clients) {
        if (cr.client_id == c) value = cr.divergence;
      }
      series.push_back(value);
    }
    trajectories.push_back({{"client_id", c}, {"divergence", series}});
  }
  json rounds = json::array();
  for (const auto& rec : result.records) {
    for (std::size_t c : rec.flagged) ++flags[c];
    rounds.push_back({{"round", rec.round},
                      {"median", rec.median},
                      {"mad", rec.mad},
                      {"probe_accuracy", rec.probe_accuracy},
                      {"eval_accuracy", rec.eval_accuracy},
                      {"flagged", rec.flagged}});
  }
  s["client_divergence"] = trajectories;
  s["rounds"] = rounds;
  s["detection"] = {
      {"threshold", cfg.anomaly.threshold},
      {"max_z_fraction", max_z_fractions(result.records, n_clients, 0)},
      {"max_z_fraction_after_round_5", max_z_fractions(result.records, n_clients, 6)},
      {"flagged_rounds", flags},
  };
  if (!result.records.empty()) {
    s["final"] = {{"probe_accuracy", result.records.back().probe_accuracy},
                  {"eval_accuracy", result.records.back().eval_accuracy}};
  }
  s["timings_seconds"] = {{"setup", result.setup_seconds},
                          {"rounds", result.rounds_seconds},
                          {"per_round", result.records.empty()
                                            ? 0.0
                                            : result.rounds_seconds /
                                                  static_cast<double>(result.records.size())}};
  return s;
}

}  // namespace fedgeo

#include <cmath>
#include <map>

namespace fedgeo {

DivergenceStats divergence_stats(const std::vector<RoundRecord>& records, std::size_t window) {
  DivergenceStats stats;
  const std::size_t start = records.size() > window ? records.size() - window : 0;
  std::map<std::size_t, std::vector<double>> per_client;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = start; r < records.size(); ++r) {
    for (const auto& c : records[r].clients) {
      per_client[c.client_id].push_back(c.divergence);
      total += c.divergence;
      ++count;
    }
  }
  if (count == 0) return stats;
  stats.mean = total / static_cast<double>(count);

  double pooled_var = 0.0;
  std::vector<double> means;
  for (const auto& [id, values] : per_client) {
    double m = 0.0;
    for (double v : values) {
      m += v;
      pooled_var += (v - stats.mean) * (v - stats.mean);
    }
    means.push_back(m / static_cast<double>(values.size()));
  }
  pooled_var /= static_cast<double>(count);
  stats.pooled_cv = stats.mean > 0.0 ? std::sqrt(pooled_var) / stats.mean : 0.0;
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  stats.cross_client_std = std::sqrt(var / static_cast<double>(means.size()));
  return stats;
}

}  // namespace fedgeo
