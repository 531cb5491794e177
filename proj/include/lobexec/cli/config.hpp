#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "lobexec/env/execution_env.hpp"
#include "lobexec/market/config.hpp"
#include "lobexec/market/shape.hpp"
#include "lobexec/train/evaluate.hpp"
#include "lobexec/train/trainer.hpp"

namespace lobexec {

/// Invalid or inconsistent experiment configuration (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnvSection {
  int lots = 20;
  int steps = 10;
  double dt = 15.0;
  int simplex_dim = 6;
  Price initial_bid = 1000;
  Price initial_ask = 1001;
  double queue_normalizer = 50.0;
  double price_normalizer = 10.0;
  int max_reset_attempts = 16;
};

struct EvalSection {
  std::size_t episodes = 10000;
  EvalMode mode = EvalMode::Stochastic;
  Execution execution = Execution::Parallel;
};

struct PathsSection {
  std::string shape_file;     ///< empty: estimate the shape in-process
  std::string checkpoint_dir; ///< reproduce-table1 looks for <market>_<lots>_<ln|dr>.json here
  std::string output_dir = "out";
};

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 1;
  MarketKind market_kind = MarketKind::Noise;
  MarketConfig market = market_preset(MarketKind::Noise);
  EnvSection env;
  TrainConfig train;                  ///< its seed is derived from `seed`
  EvalSection eval;
  ShapeEstimationOptions shape;       ///< its seed is derived from `seed`
  PathsSection paths;

  std::uint64_t train_seed() const;
  std::uint64_t eval_seed() const;
  std::uint64_t shape_seed() const;

  /// Environment for this experiment given the equilibrium shape.
  EnvConfig env_config(const StationaryShape& shape) const;
  /// Shape estimation options with the derived seed.
  ShapeEstimationOptions shape_options() const;
};

/// Parses a configuration document: missing keys take the defaults,
/// unknown keys and invalid values raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved document; parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Applies a new master seed.
void set_master_seed(ExperimentConfig& c, std::uint64_t seed);

} // namespace lobexec
