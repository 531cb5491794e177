#include "lobexec/train/trainer.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lobexec/io.hpp"
#include "lobexec/policy/simplex.hpp"

namespace lobexec {

void TrainConfig::validate(int steps) const {
  if (iterations < 1) throw std::invalid_argument("train.iterations must be >= 1");
  if (parallel_envs < 1) throw std::invalid_argument("train.parallel_envs must be >= 1");
  if (steps < 1 || steps_per_env < steps || steps_per_env % steps != 0) {
    throw std::invalid_argument("train.steps_per_env must be a positive multiple of the episode length");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (!(sigma_init > 0.0) || !(sigma_final > 0.0)) throw std::invalid_argument("train variances must be > 0");
  if (hidden_width < 1) throw std::invalid_argument("train.hidden_width must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("train.checkpoint_every must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"policy", std::string(to_string(c.policy))},
                     {"iterations", c.iterations},
                     {"parallel_envs", c.parallel_envs},
                     {"steps_per_env", c.steps_per_env},
                     {"learning_rate", c.learning_rate},
                     {"sigma_init", c.sigma_init},
                     {"sigma_final", c.sigma_final},
                     {"initial_bias", c.initial_bias},
                     {"hidden_width", c.hidden_width},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"execution", std::string(to_string(c.execution))}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "policy") c.policy = parse_policy_kind(it->get<std::string>());
    else if (k == "iterations") c.iterations = it->get<int>();
    else if (k == "parallel_envs") c.parallel_envs = it->get<int>();
    else if (k == "steps_per_env") c.steps_per_env = it->get<int>();
    else if (k == "learning_rate") c.learning_rate = it->get<double>();
    else if (k == "sigma_init") c.sigma_init = it->get<double>();
    else if (k == "sigma_final") c.sigma_final = it->get<double>();
    else if (k == "initial_bias") c.initial_bias = it->get<double>();
    else if (k == "hidden_width") c.hidden_width = it->get<int>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else if (k == "checkpoint_every") c.checkpoint_every = it->get<int>();
    else if (k == "execution") c.execution = parse_execution(it->get<std::string>());
    else throw std::invalid_argument("unknown key train." + k);
  }
}

nn::Vector rewards_to_go(const nn::Vector& rewards, int steps) {
  if (steps < 1 || rewards.size() % steps != 0) {
    throw std::invalid_argument("rewards_to_go: length is not a multiple of the episode length");
  }
  nn::Vector out(rewards.size());
  for (Eigen::Index start = 0; start < rewards.size(); start += steps) {
    double acc = 0.0;
    for (Eigen::Index n = steps; n-- > 0;) {
      acc += rewards(start + n);
      out(start + n) = acc;
    }
  }
  return out;
}

std::uint64_t collection_seed(std::uint64_t master, int iteration, int env, int episode, int attempt) {
  std::uint64_t s = derive_seed(master, "iteration", static_cast<std::uint64_t>(iteration));
  s = derive_seed(s, "env", static_cast<std::uint64_t>(env));
  s = derive_seed(s, "episode", static_cast<std::uint64_t>(episode));
  return derive_seed(s, "attempt", static_cast<std::uint64_t>(attempt));
}

namespace {

struct EpisodeRecord {
  std::vector<Observation> observations;
  std::vector<std::vector<double>> samples;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;
};

struct EnvRollout {
  std::vector<EpisodeRecord> episodes;
  std::uint64_t aborts = 0;
};

EpisodeRecord run_training_episode(const Policy& policy, ExecutionEnv& env, std::uint64_t seed) {
  EpisodeRecord rec;
  Rng action_rng(derive_seed(seed, "action"));
  Observation obs = env.reset(seed);
  for (int n = 0; n < env.config().steps; ++n) {
    PolicySample s = policy.sample(obs, action_rng);
    StepResult r = env.step(s.action);
    rec.observations.push_back(std::move(obs));
    rec.samples.push_back(std::move(s.pre_sample));
    rec.actions.push_back(std::move(s.action));
    rec.rewards.push_back(r.reward);
    obs = std::move(r.observation);
  }
  return rec;
}

constexpr int kMaxEpisodeAttempts = 64;

} // namespace

TrajectoryBatch collect(const Policy& policy, const EnvConfig& env_cfg, const TrainConfig& cfg, int iteration) {
  cfg.validate(env_cfg.steps);
  const int episodes = cfg.episodes_per_env(env_cfg.steps);
  const auto envs = static_cast<std::size_t>(cfg.parallel_envs);
  std::vector<EnvRollout> rollouts(envs);

  for_each_index(envs, cfg.execution, [&](std::size_t k) {
    EnvRollout& out = rollouts[k];
    ExecutionEnv env(env_cfg, collection_seed(cfg.seed, iteration, static_cast<int>(k), -1, 0));
    for (int e = 0; e < episodes; ++e) {
      for (int attempt = 0;; ++attempt) {
        if (attempt >= kMaxEpisodeAttempts) {
          throw EpisodeAborted("collect: episode aborted on every attempt");
        }
        try {
          out.episodes.push_back(run_training_episode(
              policy, env, collection_seed(cfg.seed, iteration, static_cast<int>(k), e, attempt)));
          break;
        } catch (const EpisodeAborted&) {
          ++out.aborts;
        }
      }
    }
    out.aborts += env.aborts();
  });

  TrajectoryBatch batch;
  batch.steps = env_cfg.steps;
  batch.trajectories = envs * static_cast<std::size_t>(episodes);
  const auto total = static_cast<Eigen::Index>(batch.trajectories) * env_cfg.steps;
  const int obs_dim = ObservationLayout::make(env_cfg.lots, env_cfg.simplex_dim).size;
  batch.observations.resize(obs_dim, total);
  batch.samples.resize(policy.sample_dim(), total);
  batch.actions.resize(env_cfg.simplex_dim + 1, total);
  batch.rewards.resize(total);
  Eigen::Index col = 0;
  for (const EnvRollout& r : rollouts) {
    batch.aborts += r.aborts;
    for (const EpisodeRecord& ep : r.episodes) {
      double ret = 0.0;
      for (std::size_t n = 0; n < ep.rewards.size(); ++n, ++col) {
        batch.observations.col(col) = Eigen::Map<const nn::Vector>(ep.observations[n].data(), obs_dim);
        batch.samples.col(col) = Eigen::Map<const nn::Vector>(ep.samples[n].data(), policy.sample_dim());
        batch.actions.col(col) = Eigen::Map<const nn::Vector>(ep.actions[n].data(), env_cfg.simplex_dim + 1);
        batch.rewards(col) = ep.rewards[n];
        ret += ep.rewards[n];
      }
      batch.episode_returns.push_back(ret);
    }
  }
  batch.rewards_to_go = rewards_to_go(batch.rewards, batch.steps);
  batch.advantages = batch.rewards_to_go;
  return batch;
}

void compute_advantages(TrajectoryBatch& batch, const nn::Mlp& value_net) {
  const nn::Matrix v = value_net.forward(batch.observations);
  batch.advantages = batch.rewards_to_go - v.row(0).transpose();
}

namespace {

void guard(double loss, const nn::Vector& grad, const char* what, std::size_t batch) {
  if (!std::isfinite(loss) || !grad.allFinite()) {
    std::ostringstream msg;
    msg << what << ": non-finite " << (std::isfinite(loss) ? "gradient" : "loss") << " (loss=" << loss
        << ", |grad|=" << grad.norm() << ", batch=" << batch << ")";
    throw TrainingDiverged(msg.str());
  }
}

} // namespace

double policy_update(Policy& policy, const TrajectoryBatch& batch, nn::Adam& optimizer) {
  nn::Vector grad = nn::Vector::Zero(static_cast<Eigen::Index>(policy.network().parameter_count()));
  const double loss = policy.loss_and_gradient(batch.observations, batch.samples, batch.advantages, grad);
  guard(loss, grad, "policy update", batch.size());
  nn::Vector params = policy.network().parameters();
  optimizer.step(params, grad);
  if (!params.allFinite()) throw TrainingDiverged("policy update produced non-finite parameters");
  policy.network().set_parameters(params);
  return loss;
}

double value_loss_and_gradient(const nn::Mlp& value_net, const nn::Matrix& obs, const nn::Vector& targets,
                               nn::Vector& grad) {
  if (obs.cols() != targets.size() || obs.cols() == 0) {
    throw nn::DimensionMismatch("value loss: observation and target counts disagree");
  }
  nn::ForwardCache cache;
  const nn::Matrix v = value_net.forward(obs, cache);
  const nn::Matrix resid = v - targets.transpose();
  const double b = static_cast<double>(obs.cols());
  value_net.backward(cache, 2.0 * resid / b, grad);
  return resid.squaredNorm() / b;
}

double value_update(nn::Mlp& value_net, const TrajectoryBatch& batch, nn::Adam& optimizer) {
  nn::Vector grad = nn::Vector::Zero(static_cast<Eigen::Index>(value_net.parameter_count()));
  const double loss = value_loss_and_gradient(value_net, batch.observations, batch.rewards_to_go, grad);
  guard(loss, grad, "value update", batch.size());
  nn::Vector params = value_net.parameters();
  optimizer.step(params, grad);
  if (!params.allFinite()) throw TrainingDiverged("value update produced non-finite parameters");
  value_net.set_parameters(params);
  return loss;
}

nn::Mlp make_value_net(int obs_dim, const TrainConfig& cfg, Rng& init_rng) {
  return nn::make_orthogonal_mlp({obs_dim, cfg.hidden_width, cfg.hidden_width, 1}, 0.01, 0.01, nn::Vector::Zero(1),
                                 init_rng);
}

double iteration_variance(const TrainConfig& cfg, int iteration) {
  if (cfg.iterations < 2) return cfg.sigma_init;
  return variance_schedule(iteration, cfg.iterations, cfg.sigma_init, cfg.sigma_final);
}

TrainerState::TrainerState(const TrainerState& other)
    : config(other.config), iteration(other.iteration), policy(other.policy ? other.policy->clone() : nullptr),
      value_net(other.value_net), policy_optimizer(other.policy_optimizer), value_optimizer(other.value_optimizer),
      curve(other.curve) {}

TrainerState& TrainerState::operator=(const TrainerState& other) {
  if (this != &other) {
    TrainerState copy(other);
    *this = std::move(copy);
  }
  return *this;
}

TrainerState initial_trainer_state(const TrainConfig& cfg, int obs_dim, int simplex_dim) {
  TrainerState s;
  s.config = cfg;
  Rng init(derive_seed(cfg.seed, "init"));
  PolicyNetConfig net;
  net.hidden_width = cfg.hidden_width;
  if (cfg.policy == PolicyKind::LogisticNormal) {
    s.policy = std::make_unique<LogisticNormalPolicy>(obs_dim, simplex_dim, init, cfg.initial_bias,
                                                      iteration_variance(cfg, 1), net);
  } else {
    s.policy = std::make_unique<DirichletPolicy>(obs_dim, simplex_dim, init, 10.0, net);
  }
  s.value_net = make_value_net(obs_dim, cfg, init);
  nn::AdamConfig adam;
  adam.lr = cfg.learning_rate;
  s.policy_optimizer = nn::Adam(s.policy->network().parameter_count(), adam);
  s.value_optimizer = nn::Adam(s.value_net.parameter_count(), adam);
  return s;
}

void to_json(nlohmann::json& j, const TrainerState& s) {
  nlohmann::json policy;
  s.policy->to_json(policy);
  nlohmann::json curve = nlohmann::json::array();
  for (const CurvePoint& p : s.curve) {
    curve.push_back({{"iteration", p.iteration},
                     {"mean_return", p.mean_return},
                     {"sigma", p.sigma},
                     {"policy_loss", p.policy_loss},
                     {"value_loss", p.value_loss},
                     {"aborts", p.aborts}});
  }
  j = nlohmann::json{{"format", "lobexec-checkpoint"},
                     {"version", 1},
                     {"config", s.config},
                     {"iteration", s.iteration},
                     {"policy", policy},
                     {"value_net", s.value_net},
                     {"policy_optimizer", s.policy_optimizer},
                     {"value_optimizer", s.value_optimizer},
                     {"curve", curve}};
}

TrainerState trainer_state_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "lobexec-checkpoint" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version-1 checkpoint");
  }
  TrainerState s;
  s.config = j.at("config").get<TrainConfig>();
  s.iteration = j.at("iteration").get<int>();
  s.policy = policy_from_json(j.at("policy"));
  s.value_net = j.at("value_net").get<nn::Mlp>();
  s.policy_optimizer = j.at("policy_optimizer").get<nn::Adam>();
  s.value_optimizer = j.at("value_optimizer").get<nn::Adam>();
  for (const auto& p : j.at("curve")) {
    CurvePoint c;
    c.iteration = p.at("iteration").get<int>();
    c.mean_return = p.at("mean_return").get<double>();
    c.sigma = p.at("sigma").get<double>();
    c.policy_loss = p.at("policy_loss").get<double>();
    c.value_loss = p.at("value_loss").get<double>();
    c.aborts = p.at("aborts").get<std::uint64_t>();
    s.curve.push_back(c);
  }
  if (s.policy->kind() != s.config.policy) {
    throw std::invalid_argument("checkpoint policy kind disagrees with its config");
  }
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainerState& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << nlohmann::json(s).dump() << '\n';
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return trainer_state_from_json(nlohmann::json::parse(in));
}

void train(TrainerState& state, const EnvConfig& env_cfg, const TrainHooks& hooks) {
  const TrainConfig& cfg = state.config;
  cfg.validate(env_cfg.steps);
  env_cfg.validate();
  if (!state.policy) throw std::invalid_argument("train: trainer state has no policy");
  const auto start = std::chrono::steady_clock::now();
  while (state.iteration < cfg.iterations) {
    const int i = state.iteration + 1;
    const double sigma = iteration_variance(cfg, i);
    if (state.policy->kind() == PolicyKind::LogisticNormal) state.policy->set_variance(sigma);

    TrajectoryBatch batch = collect(*state.policy, env_cfg, cfg, i);
    compute_advantages(batch, state.value_net);
    CurvePoint p;
    p.iteration = i;
    p.sigma = state.policy->kind() == PolicyKind::LogisticNormal ? sigma : 0.0;
    p.policy_loss = policy_update(*state.policy, batch, state.policy_optimizer);
    p.value_loss = value_update(state.value_net, batch, state.value_optimizer);
    if (!state.policy->network().all_finite() || !state.value_net.all_finite()) {
      throw TrainingDiverged("non-finite parameters after iteration " + std::to_string(i));
    }
    double total = 0.0;
    for (double r : batch.episode_returns) total += r;
    p.mean_return = total / static_cast<double>(batch.episode_returns.size());
    p.aborts = batch.aborts;
    p.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.curve.push_back(p);
    state.iteration = i;
    if (state.policy->kind() == PolicyKind::LogisticNormal && i < cfg.iterations) {
      state.policy->set_variance(iteration_variance(cfg, i + 1));
    }
    if (hooks.on_iteration) hooks.on_iteration(p);
    const bool checkpoint = (cfg.checkpoint_every > 0 && i % cfg.checkpoint_every == 0) || i == cfg.iterations;
    if (checkpoint && hooks.on_checkpoint) hooks.on_checkpoint(state);
  }
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "iteration,mean_return,sigma,wall_time\n";
  for (const CurvePoint& p : curve) {
    out << p.iteration << ',' << format_double(p.mean_return) << ',' << format_double(p.sigma) << ','
        << format_double(p.wall_time) << '\n';
  }
}

} // namespace lobexec
