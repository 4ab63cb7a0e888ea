#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fedgeo {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitInvalidConfig = 2,
  kExitDataError = 3,
  kExitNumericFailure = 4,
};

struct RunFlags {
  std::optional<std::filesystem::path> out;  // overrides output.dir
  std::optional<unsigned> threads;           // overrides FEDGEO_THREADS
  std::optional<std::string> dump_affinity;  // "round:client"
};

// --threads wins, then FEDGEO_THREADS, then 1.
unsigned resolve_threads(std::optional<unsigned> flag);

// Parses "r:c". Throws ConfigError on malformed input.
std::pair<std::size_t, std::size_t> parse_dump_spec(const std::string& spec);

int cmd_run(const std::filesystem::path& config_path, const RunFlags& flags, std::ostream& log);

// One run per value into <out>/<key>=<value>/, plus <out>/sweep_summary.json.
// Exit code is the maximum over sub-runs.
int cmd_sweep(const std::filesystem::path& config_path, const std::string& key,
              const std::vector<std::string>& values, const RunFlags& flags, std::ostream& log);

int cmd_verify(std::ostream& out);

}  // namespace fedgeo
