// fedgeo: federated training simulator with activation-geometry client monitoring.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedgeo/cli.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated MLP simulator with activation-geometry divergence monitoring"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  unsigned threads = 0;
  std::string dump;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--threads", threads, "Worker threads (overrides FEDGEO_THREADS)");
  run->add_option("--dump-affinity", dump, "Dump affinity matrices for <round>:<client>");

  std::string sweep_key;
  std::string sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  sweep->add_option("--config", config, "Config file")->required();
  sweep->add_option("--key", sweep_key, "Dotted config key, e.g. partition.alpha")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep->add_option("--out", out_dir, "Output root (overrides output.dir)");
  sweep->add_option("--threads", threads, "Worker threads (overrides FEDGEO_THREADS)");

  app.add_subcommand("verify", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fedgeo::kExitInvalidConfig;
  }

  fedgeo::RunFlags flags;
  if (!out_dir.empty()) flags.out = out_dir;
  if (threads > 0) flags.threads = threads;
  if (!dump.empty()) flags.dump_affinity = dump;

  if (app.got_subcommand("run")) return fedgeo::cmd_run(config, flags, std::cout);
  if (app.got_subcommand("sweep")) {
    return fedgeo::cmd_sweep(config, sweep_key, split_csv(sweep_values), flags, std::cout);
  }
  return fedgeo::cmd_verify(std::cout);
}
