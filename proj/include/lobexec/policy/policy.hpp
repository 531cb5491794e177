#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobexec/lob/order_book.hpp"
#include "lobexec/nn/mlp.hpp"
#include "lobexec/rng.hpp"

namespace lobexec {

enum class PolicyKind { LogisticNormal, Dirichlet };

std::string_view to_string(PolicyKind k) noexcept;
PolicyKind parse_policy_kind(std::string_view name);

struct PolicySample {
  std::vector<double> action;     ///< K+1 simplex entries
  std::vector<double> pre_sample; ///< normal draw x for LN, the action itself for DR
  double log_density = 0.0;       ///< of pre_sample under the sampling law
};

struct PolicyNetConfig {
  int hidden_layers = 2;
  int hidden_width = 128;
  double hidden_gain = 0.01;
  double output_gain = 1e-5;
};

/// Stochastic allocation policy on the K-simplex driven by an MLP.
class Policy {
public:
  virtual ~Policy() = default;

  virtual PolicyKind kind() const noexcept = 0;
  virtual int simplex_dim() const noexcept = 0; ///< K; actions have K+1 entries
  virtual int sample_dim() const noexcept = 0;

  virtual PolicySample sample(std::span<const double> obs, Rng& rng) const = 0;
  /// Deterministic action: logistic(mu) for LN, alpha / sum(alpha) for DR.
  virtual std::vector<double> mean_action(std::span<const double> obs) const = 0;

  /// Log density of each stored pre-sample (one per column) given its observation.
  virtual nn::Vector log_density(const nn::Matrix& obs, const nn::Matrix& samples) const = 0;

  /// Loss -(1/B) sum_b log p(sample_b | obs_b) * adv_b; adds the gradient
  /// with respect to the network parameters into `grad`.
  virtual double loss_and_gradient(const nn::Matrix& obs, const nn::Matrix& samples, const nn::Vector& adv,
                                   nn::Vector& grad) const = 0;

  virtual const nn::Mlp& network() const noexcept = 0;
  virtual nn::Mlp& network() noexcept = 0;

  /// Exploration variance for LN (ignored by DR).
  virtual double variance() const noexcept { return 0.0; }
  virtual void set_variance(double) {}

  virtual std::unique_ptr<Policy> clone() const = 0;
  virtual void to_json(nlohmann::json& j) const = 0;
};

/// Logistic-normal policy: x ~ Normal(mu(obs), variance * I), a = logistic(x).
class LogisticNormalPolicy final : public Policy {
public:
  LogisticNormalPolicy(int obs_dim, int simplex_dim, Rng& init_rng, double initial_bias = -1.0,
                       double variance = 1.0, PolicyNetConfig net = {});
  LogisticNormalPolicy(nn::Mlp mean_net, double variance);

  PolicyKind kind() const noexcept override { return PolicyKind::LogisticNormal; }
  int simplex_dim() const noexcept override { return net_.output_dim(); }
  int sample_dim() const noexcept override { return net_.output_dim(); }

  std::vector<double> mean(std::span<const double> obs) const;
  PolicySample sample(std::span<const double> obs, Rng& rng) const override;
  std::vector<double> mean_action(std::span<const double> obs) const override;
  nn::Vector log_density(const nn::Matrix& obs, const nn::Matrix& samples) const override;
  double loss_and_gradient(const nn::Matrix& obs, const nn::Matrix& samples, const nn::Vector& adv,
                           nn::Vector& grad) const override;

  const nn::Mlp& network() const noexcept override { return net_; }
  nn::Mlp& network() noexcept override { return net_; }
  double variance() const noexcept override { return variance_; }
  void set_variance(double v) override;

  std::unique_ptr<Policy> clone() const override { return std::make_unique<LogisticNormalPolicy>(*this); }
  void to_json(nlohmann::json& j) const override;

private:
  nn::Mlp net_;
  double variance_ = 1.0;
};

/// Dirichlet policy: a ~ Dir(softplus(net(obs))).
class DirichletPolicy final : public Policy {
public:
  /// Output biases are set so the initial concentration is (1, ..., 1, held_back).
  DirichletPolicy(int obs_dim, int simplex_dim, Rng& init_rng, double held_back_concentration = 10.0,
                  PolicyNetConfig net = {});
  explicit DirichletPolicy(nn::Mlp alpha_net);

  PolicyKind kind() const noexcept override { return PolicyKind::Dirichlet; }
  int simplex_dim() const noexcept override { return net_.output_dim() - 1; }
  int sample_dim() const noexcept override { return net_.output_dim(); }

  std::vector<double> concentration(std::span<const double> obs) const;
  PolicySample sample(std::span<const double> obs, Rng& rng) const override;
  std::vector<double> mean_action(std::span<const double> obs) const override;
  nn::Vector log_density(const nn::Matrix& obs, const nn::Matrix& samples) const override;
  double loss_and_gradient(const nn::Matrix& obs, const nn::Matrix& samples, const nn::Vector& adv,
                           nn::Vector& grad) const override;

  const nn::Mlp& network() const noexcept override { return net_; }
  nn::Mlp& network() noexcept override { return net_; }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<DirichletPolicy>(*this); }
  void to_json(nlohmann::json& j) const override;

private:
  nn::Mlp net_;
};

/// Dirichlet draw from K+1 independent gamma variates.
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

/// Builds a freshly initialized policy of the requested kind.
std::unique_ptr<Policy> make_policy(PolicyKind kind, int obs_dim, int simplex_dim, Rng& init_rng);

std::unique_ptr<Policy> policy_from_json(const nlohmann::json& j);

enum class HeuristicKind { SubmitAndLeave, Twap };

std::string_view to_string(HeuristicKind k) noexcept;
HeuristicKind parse_heuristic_kind(std::string_view name);

/// Lots the heuristic posts at the best ask at step n of an N-step episode.
/// SL posts all M at n = 0; TWAP posts floor(M/N) per step with the
/// remainder spread over the earliest steps.
Lots heuristic_lots(HeuristicKind kind, int step, Lots total, int steps);

} // namespace lobexec
