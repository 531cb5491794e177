#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "lobexec/cli/config.hpp"

namespace lobexec {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3 };

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

/// Loads the config (or the defaults) and applies --seed and --out.
ExperimentConfig resolve_config(const CommonOptions& opts);

/// Per-run record written next to the outputs as manifest-<command>.json.
struct RunManifest {
  std::string command;
  std::string config_hash;  ///< FNV-1a 64 of the resolved config document
  std::uint64_t master_seed = 0;
  std::map<std::string, std::uint64_t> seeds;
  std::string version;
  std::string started_at;   ///< UTC, ISO 8601
  std::string finished_at;
  std::map<std::string, std::uint64_t> aborts;
  std::string status = "ok";
  std::string error;
};

void to_json(nlohmann::json& j, const RunManifest& m);
std::string config_hash(const ExperimentConfig& c);
std::string code_version();

struct TrainOptions {
  std::optional<std::filesystem::path> resume;  ///< checkpoint to continue from
  bool quiet = false;
};

struct EvaluateOptions {
  std::optional<HeuristicKind> benchmark;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<EvalMode> mode;   ///< overrides eval.mode
  bool trace = false;             ///< also writes trace.csv for episode 0
};

struct Table1Options {
  bool benchmarks_only = false;
};

/// Each command writes into the config's output directory and returns an
/// exit code; configuration errors throw ConfigError.
int cmd_estimate_shape(const ExperimentConfig& c, RunManifest& manifest);
int cmd_train(const ExperimentConfig& c, const TrainOptions& opts, RunManifest& manifest);
int cmd_evaluate(const ExperimentConfig& c, const EvaluateOptions& opts, RunManifest& manifest);
int cmd_reproduce_table1(const ExperimentConfig& c, const Table1Options& opts, RunManifest& manifest);

/// Runs `body` with error mapping (ConfigError -> 2, other exceptions -> 3)
/// and always writes the manifest when the output directory is known.
int run_command(const std::string& command, const CommonOptions& common,
                const std::function<int(const ExperimentConfig&, RunManifest&)>& body);

/// Shape for the experiment: paths.shape_file when set, otherwise estimated
/// from the equilibrium market.
StationaryShape experiment_shape(const ExperimentConfig& c);

} // namespace lobexec
