#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobexec/env/execution_env.hpp"
#include "lobexec/nn/mlp.hpp"
#include "lobexec/parallel.hpp"
#include "lobexec/policy/policy.hpp"

namespace lobexec {

struct TrainConfig {
  PolicyKind policy = PolicyKind::LogisticNormal;
  int iterations = 400;      ///< H
  int parallel_envs = 128;
  int steps_per_env = 100;   ///< whole episodes: a multiple of N
  double learning_rate = 5e-4;
  double sigma_init = 1.0;
  double sigma_final = 0.1;
  double initial_bias = -1.0;
  int hidden_width = 128;
  std::uint64_t seed = 1;
  int checkpoint_every = 50;
  Execution execution = Execution::Parallel;

  int episodes_per_env(int steps) const { return steps_per_env / steps; }
  int trajectories(int steps) const { return parallel_envs * episodes_per_env(steps); }
  void validate(int steps) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Non-finite loss or gradient during an update.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One column per transition, ordered by (env, episode, step).
struct TrajectoryBatch {
  int steps = 0; ///< N
  std::size_t trajectories = 0;
  nn::Matrix observations;
  nn::Matrix samples;
  nn::Matrix actions;
  nn::Vector rewards;
  nn::Vector rewards_to_go;
  nn::Vector advantages;
  std::vector<double> episode_returns;
  std::uint64_t aborts = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rewards.size()); }
};

/// Suffix sums of rewards within each N-step trajectory.
nn::Vector rewards_to_go(const nn::Vector& rewards, int steps);

/// Seed for episode `episode` of env `env` in training iteration `iteration`.
std::uint64_t collection_seed(std::uint64_t master, int iteration, int env, int episode, int attempt);

/// Runs `episodes_per_env` whole episodes on each env with actions sampled
/// from the frozen policy. Mid-episode aborts are discarded, counted and
/// rerun with a fresh seed. Batch order is independent of execution mode.
TrajectoryBatch collect(const Policy& policy, const EnvConfig& env_cfg, const TrainConfig& cfg, int iteration);

/// A = reward-to-go - V(s), no discounting.
void compute_advantages(TrajectoryBatch& batch, const nn::Mlp& value_net);

/// One Adam step on -(1/B) sum log p(sample | s) A. Returns the loss.
double policy_update(Policy& policy, const TrajectoryBatch& batch, nn::Adam& optimizer);

/// One Adam step on the mean squared error between V(s) and the reward-to-go.
double value_update(nn::Mlp& value_net, const TrajectoryBatch& batch, nn::Adam& optimizer);

/// Value-network loss and gradient (added into `grad`) without stepping.
double value_loss_and_gradient(const nn::Mlp& value_net, const nn::Matrix& obs, const nn::Vector& targets,
                               nn::Vector& grad);

nn::Mlp make_value_net(int obs_dim, const TrainConfig& cfg, Rng& init_rng);

/// Exploration variance used in iteration i (1-based).
double iteration_variance(const TrainConfig& cfg, int iteration);

struct CurvePoint {
  int iteration = 0;
  double mean_return = 0.0;
  double sigma = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::uint64_t aborts = 0;
  double wall_time = 0.0; ///< seconds since the start of this process's training call
};

/// Complete trainer state after `iteration` finished iterations.
struct TrainerState {
  TrainConfig config;
  int iteration = 0;
  std::unique_ptr<Policy> policy;
  nn::Mlp value_net;
  nn::Adam policy_optimizer;
  nn::Adam value_optimizer;
  std::vector<CurvePoint> curve;

  TrainerState() = default;
  TrainerState(const TrainerState& other);
  TrainerState& operator=(const TrainerState& other);
  TrainerState(TrainerState&&) noexcept = default;
  TrainerState& operator=(TrainerState&&) noexcept = default;
};

TrainerState initial_trainer_state(const TrainConfig& cfg, int obs_dim, int simplex_dim);

void to_json(nlohmann::json& j, const TrainerState& s);
TrainerState trainer_state_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const TrainerState& s);
TrainerState load_checkpoint(const std::filesystem::path& path);

struct TrainHooks {
  std::function<void(const CurvePoint&)> on_iteration;
  std::function<void(const TrainerState&)> on_checkpoint; ///< every cfg.checkpoint_every iterations and at the end
};

/// Runs iterations state.iteration+1 .. H: collect, policy
/// step, value step, then the next variance from the schedule.
void train(TrainerState& state, const EnvConfig& env_cfg, const TrainHooks& hooks = {});

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

} // namespace lobexec
