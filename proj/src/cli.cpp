#include "fedgeo/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include "fedgeo/config.hpp"
#include "fedgeo/errors.hpp"
#include "fedgeo/fed_sim.hpp"
#include "fedgeo/report.hpp"
#include "fedgeo/verify.hpp"

namespace fedgeo {

namespace {

struct RunOutput {
  int code = kExitOk;
  std::optional<ExperimentResult> result;
};

// Runs one fully-specified config, writing CSV, summary and effective config.
RunOutput execute(const SimConfig& cfg, const RunFlags& flags, std::ostream& log) {
  RunOutput out;
  try {
    validate_config(cfg);
    RunOptions options;
    options.threads = resolve_threads(flags.threads);
    options.dump_dir = cfg.output.dir;
    if (flags.dump_affinity) options.dump_affinity = parse_dump_spec(*flags.dump_affinity);

    std::filesystem::create_directories(cfg.output.dir);
    {
      std::ofstream ini(cfg.output.dir / "config.effective.ini");
      ini << config_to_text(cfg);
    }
    const auto csv_path = cfg.output.dir / cfg.output.csv;
    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write " + csv_path.string());
    write_csv_header(csv);
    auto result = run_experiment(cfg, options, [&](const RoundRecord& rec) {
      write_csv_rows(csv, rec);
      csv.flush();
      double max_z = 0.0;
      for (const auto& c : rec.clients) max_z = std::max(max_z, c.zscore);
      log << "round " << rec.round << "  median D=" << format_double(rec.median)
          << "  MAD=" << format_double(rec.mad) << "  max z=" << max_z
          << "  probe acc=" << rec.probe_accuracy << "  flagged=" << rec.flagged.size() << '\n';
    });
    const auto summary_path = cfg.output.dir / cfg.output.summary;
    std::ofstream summary(summary_path);
    if (!summary) throw DataError("cannot write " + summary_path.string());
    summary << build_summary(cfg, result).dump(2) << '\n';
    log << "wrote " << csv_path.string() << " and " << summary_path.string() << '\n';
    out.result = std::move(result);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    out.code = kExitInvalidConfig;
  } catch (const DataError& e) {
    log << "data error: " << e.what() << '\n';
    out.code = kExitDataError;
  } catch (const NumericError& e) {
    log << "numeric failure: " << e.what() << '\n';
    out.code = kExitNumericFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "data error: " << e.what() << '\n';
    out.code = kExitDataError;
  }
  return out;
}

}  // namespace

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("FEDGEO_THREADS")) {
    unsigned v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return 1;
}

std::pair<std::size_t, std::size_t> parse_dump_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  std::size_t r = 0, c = 0;
  bool ok = colon != std::string::npos;
  if (ok) {
    const char* b = spec.data();
    const auto [p1, e1] = std::from_chars(b, b + colon, r);
    const auto [p2, e2] = std::from_chars(b + colon + 1, b + spec.size(), c);
    ok = e1 == std::errc() && p1 == b + colon && e2 == std::errc() && p2 == b + spec.size() &&
         colon > 0 && colon + 1 < spec.size();
  }
  if (!ok) throw ConfigError("--dump-affinity expects <round>:<client>, got '" + spec + "'");
  return {r, c};
}

int cmd_run(const std::filesystem::path& config_path, const RunFlags& flags, std::ostream& log) {
  SimConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
  if (flags.out) cfg.output.dir = *flags.out;
  return execute(cfg, flags, log).code;
}

int cmd_sweep(const std::filesystem::path& config_path, const std::string& key,
              const std::vector<std::string>& values, const RunFlags& flags, std::ostream& log) {
  SimConfig base;
  try {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    base = load_config(config_path);
    if (!is_scalar_key(key)) throw ConfigError("config key '" + key + "' is not a scalar");
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
  if (flags.out) base.output.dir = *flags.out;
  const auto root = base.output.dir;

  nlohmann::json combined;
  combined["key"] = key;
  combined["values"] = values;
  combined["runs"] = nlohmann::json::array();
  int worst = kExitOk;
  for (const auto& value : values) {
    SimConfig cfg = base;
    cfg.output.dir = root / (key + "=" + value);
    nlohmann::json entry{{"value", value}, {"output_dir", cfg.output.dir.string()}};
    RunOutput out;
    try {
      set_config_value(cfg, key, value);
      log << "== " << key << " = " << value << '\n';
      out = execute(cfg, flags, log);
    } catch (const ConfigError& e) {
      log << "error: " << e.what() << '\n';
      out.code = kExitInvalidConfig;
    }
    entry["exit_code"] = out.code;
    if (out.result) {
      const auto stats = divergence_stats(out.result->records, 10);
      entry["csv"] = (cfg.output.dir / cfg.output.csv).string();
      entry["last10_mean_divergence"] = stats.mean;
      entry["last10_cross_client_std"] = stats.cross_client_std;
      entry["last10_pooled_cv"] = stats.pooled_cv;
      entry["final_eval_accuracy"] =
          out.result->records.empty() ? 0.0 : out.result->records.back().eval_accuracy;
      entry["max_z_fraction_after_round_5"] =
          max_z_fractions(out.result->records, cfg.partition.n_clients, 6);
    }
    combined["runs"].push_back(entry);
    worst = std::max(worst, out.code);
  }
  try {
    std::filesystem::create_directories(root);
    std::ofstream summary(root / "sweep_summary.json");
    summary << combined.dump(2) << '\n';
    if (!summary) throw DataError("cannot write sweep summary");
  } catch (const std::exception& e) {
    log << "data error: " << e.what() << '\n';
    worst = std::max<int>(worst, kExitDataError);
  }
  return worst;
}

int cmd_verify(std::ostream& out) {
  return report_verification(out, run_verification()) ? kExitOk : kExitVerifyFailed;
}

}  // namespace fedgeo
