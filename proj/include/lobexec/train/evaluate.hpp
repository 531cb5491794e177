#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "lobexec/env/execution_env.hpp"
#include "lobexec/parallel.hpp"
#include "lobexec/policy/policy.hpp"

namespace lobexec {

enum class EvalMode { Stochastic, Mean };

std::string_view to_string(EvalMode m) noexcept;
EvalMode parse_eval_mode(std::string_view name);

/// Fixed-width histogram; values outside [low, high) land in the edge bins.
struct Histogram {
  double low = -12.0;
  double high = 6.0;
  double width = 0.25;
  std::vector<std::uint64_t> counts;

  static Histogram make(double low = -12.0, double high = 6.0, double width = 0.25);
  std::size_t bins() const noexcept { return counts.size(); }
  double bin_left(std::size_t i) const noexcept { return low + width * static_cast<double>(i); }
  void add(double value);
  std::uint64_t total() const noexcept;
};

/// Chooses and executes one step; must be safe to call concurrently on
/// distinct envs.
using Controller = std::function<StepResult(ExecutionEnv& env, const Observation& obs, Rng& rng)>;

Controller policy_controller(const Policy& policy, EvalMode mode);
Controller heuristic_controller(HeuristicKind kind);

struct EvalResult {
  std::vector<double> returns;    ///< total normalized reward per episode
  std::vector<Lots> lots_forced;  ///< lots sold by the terminal liquidation
  double mean = 0.0;
  double stddev = 0.0;            ///< population standard deviation
  Histogram histogram;
  std::uint64_t aborts = 0;
  std::uint64_t incomplete_liquidations = 0;
};

/// Seed of evaluation episode e (attempt counts mid-episode aborts).
std::uint64_t evaluation_seed(std::uint64_t master, std::size_t episode, int attempt);

/// Runs `episodes` episodes, episode e seeded only by (seed, e), so results
/// do not depend on the execution mode or thread count.
EvalResult evaluate(const Controller& controller, const EnvConfig& env_cfg, std::size_t episodes, std::uint64_t seed,
                    Execution execution = Execution::Parallel);

/// CSV: episode,total_reward,lots_forced
void write_evaluation_csv(std::ostream& out, const EvalResult& r);
/// CSV: bin_left,count
void write_histogram_csv(std::ostream& out, const Histogram& h);

} // namespace lobexec
