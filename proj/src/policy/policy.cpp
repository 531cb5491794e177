#include "lobexec/policy/policy.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <nlohmann/json.hpp>

#include "lobexec/policy/simplex.hpp"

namespace lobexec {

std::string_view to_string(PolicyKind k) noexcept {
  return k == PolicyKind::LogisticNormal ? "logistic_normal" : "dirichlet";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "logistic_normal" || name == "ln") return PolicyKind::LogisticNormal;
  if (name == "dirichlet" || name == "dr") return PolicyKind::Dirichlet;
  throw std::invalid_argument("unknown policy kind '" + std::string(name) + "'");
}

namespace {

std::vector<int> layer_dims(int in, int out, const PolicyNetConfig& cfg) {
  if (in < 1 || out < 1 || cfg.hidden_layers < 0 || cfg.hidden_width < 1) {
    throw nn::DimensionMismatch("policy network dimensions must be positive");
  }
  std::vector<int> dims{in};
  for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.hidden_width);
  dims.push_back(out);
  return dims;
}

nn::Vector as_vector(std::span<const double> v) {
  return Eigen::Map<const nn::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_std(const nn::Vector& v) { return {v.data(), v.data() + v.size()}; }

void check_batch(const nn::Matrix& obs, const nn::Matrix& samples, const nn::Vector& adv, int sample_rows) {
  if (samples.rows() != sample_rows || samples.cols() != obs.cols() || adv.size() != obs.cols()) {
    throw nn::DimensionMismatch("policy batch: observation, sample and advantage counts disagree");
  }
  if (obs.cols() == 0) throw nn::DimensionMismatch("policy batch is empty");
}

} // namespace

LogisticNormalPolicy::LogisticNormalPolicy(int obs_dim, int simplex_dim, Rng& init_rng, double initial_bias,
                                           double variance, PolicyNetConfig net)
    : net_(nn::make_orthogonal_mlp(layer_dims(obs_dim, simplex_dim, net), net.hidden_gain, net.output_gain,
                                   nn::Vector::Constant(simplex_dim, initial_bias), init_rng)) {
  set_variance(variance);
}

LogisticNormalPolicy::LogisticNormalPolicy(nn::Mlp mean_net, double variance) : net_(std::move(mean_net)) {
  set_variance(variance);
}

void LogisticNormalPolicy::set_variance(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error("policy variance must be positive and finite");
  variance_ = v;
}

std::vector<double> LogisticNormalPolicy::mean(std::span<const double> obs) const {
  return as_std(net_.forward(as_vector(obs)));
}

PolicySample LogisticNormalPolicy::sample(std::span<const double> obs, Rng& rng) const {
  PolicySample s;
  const std::vector<double> mu = mean(obs);
  const double sd = std::sqrt(variance_);
  s.pre_sample.resize(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) s.pre_sample[k] = mu[k] + sd * rng.normal();
  s.action = logistic(s.pre_sample);
  s.log_density = normal_log_density(s.pre_sample, mu, variance_);
  return s;
}

std::vector<double> LogisticNormalPolicy::mean_action(std::span<const double> obs) const { return logistic(mean(obs)); }

nn::Vector LogisticNormalPolicy::log_density(const nn::Matrix& obs, const nn::Matrix& samples) const {
  const nn::Matrix mu = net_.forward(obs);
  if (samples.rows() != mu.rows() || samples.cols() != mu.cols()) {
    throw nn::DimensionMismatch("log_density: sample shape");
  }
  const double k = static_cast<double>(mu.rows());
  return (-0.5 * k * std::log(2.0 * std::numbers::pi * variance_) -
          0.5 * (samples - mu).colwise().squaredNorm().array() / variance_)
      .matrix()
      .transpose();
}

double LogisticNormalPolicy::loss_and_gradient(const nn::Matrix& obs, const nn::Matrix& samples, const nn::Vector& adv,
                                               nn::Vector& grad) const {
  check_batch(obs, samples, adv, sample_dim());
  nn::ForwardCache cache;
  const nn::Matrix mu = net_.forward(obs, cache);
  const nn::Matrix diff = samples - mu;
  const double b = static_cast<double>(obs.cols());
  const double k = static_cast<double>(mu.rows());
  const nn::Vector logp =
      (-0.5 * k * std::log(2.0 * std::numbers::pi * variance_) - 0.5 * diff.colwise().squaredNorm().array() / variance_)
          .matrix()
          .transpose();
  const double loss = -logp.dot(adv) / b;
  // d logp / d mu = (x - mu) / variance
  const nn::Matrix dmu = -(diff * adv.asDiagonal()) / (variance_ * b);
  net_.backward(cache, dmu, grad);
  return loss;
}

void LogisticNormalPolicy::to_json(nlohmann::json& j) const {
  j = nlohmann::json{{"kind", lobexec::to_string(kind())}, {"variance", variance_}, {"network", net_}};
}

DirichletPolicy::DirichletPolicy(int obs_dim, int simplex_dim, Rng& init_rng, double held_back_concentration,
                                 PolicyNetConfig net) {
  nn::Vector bias = nn::Vector::Constant(simplex_dim + 1, softplus_inv(1.0));
  bias(simplex_dim) = softplus_inv(held_back_concentration);
  net_ = nn::make_orthogonal_mlp(layer_dims(obs_dim, simplex_dim + 1, net), net.hidden_gain, net.output_gain, bias,
                                 init_rng);
}

DirichletPolicy::DirichletPolicy(nn::Mlp alpha_net) : net_(std::move(alpha_net)) {
  if (net_.output_dim() < 2) throw nn::DimensionMismatch("dirichlet network needs at least two outputs");
}

std::vector<double> DirichletPolicy::concentration(std::span<const double> obs) const {
  nn::Vector y = net_.forward(as_vector(obs));
  std::vector<double> alpha(static_cast<std::size_t>(y.size()));
  for (Eigen::Index k = 0; k < y.size(); ++k) alpha[static_cast<std::size_t>(k)] = softplus(y(k));
  return alpha;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> a(alpha.size());
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    a[k] = rng.gamma(alpha[k]);
    total += a[k];
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed; all mass goes to the largest concentration.
    std::size_t best = 0;
    for (std::size_t k = 1; k < alpha.size(); ++k) {
      if (alpha[k] > alpha[best]) best = k;
    }
    std::fill(a.begin(), a.end(), 0.0);
    a[best] = 1.0;
    return a;
  }
  for (double& v : a) v /= total;
  return a;
}

PolicySample DirichletPolicy::sample(std::span<const double> obs, Rng& rng) const {
  PolicySample s;
  const std::vector<double> alpha = concentration(obs);
  s.action = sample_dirichlet(alpha, rng);
  s.pre_sample = s.action;
  s.log_density = dirichlet_log_density(s.action, alpha);
  return s;
}

std::vector<double> DirichletPolicy::mean_action(std::span<const double> obs) const {
  std::vector<double> alpha = concentration(obs);
  double total = 0.0;
  for (double v : alpha) total += v;
  for (double& v : alpha) v /= total;
  return alpha;
}

nn::Vector DirichletPolicy::log_density(const nn::Matrix& obs, const nn::Matrix& samples) const {
  const nn::Matrix y = net_.forward(obs);
  if (samples.rows() != y.rows() || samples.cols() != y.cols()) {
    throw nn::DimensionMismatch("log_density: sample shape");
  }
  nn::Vector out(y.cols());
  std::vector<double> alpha(static_cast<std::size_t>(y.rows()));
  std::vector<double> a(alpha.size());
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    for (Eigen::Index k = 0; k < y.rows(); ++k) {
      alpha[static_cast<std::size_t>(k)] = softplus(y(k, c));
      a[static_cast<std::size_t>(k)] = samples(k, c);
    }
    out(c) = dirichlet_log_density(a, alpha);
  }
  return out;
}

double DirichletPolicy::loss_and_gradient(const nn::Matrix& obs, const nn::Matrix& samples, const nn::Vector& adv,
                                          nn::Vector& grad) const {
  check_batch(obs, samples, adv, sample_dim());
  nn::ForwardCache cache;
  const nn::Matrix y = net_.forward(obs, cache);
  const double b = static_cast<double>(obs.cols());
  nn::Matrix dy(y.rows(), y.cols());
  std::vector<double> alpha(static_cast<std::size_t>(y.rows()));
  std::vector<double> a(alpha.size());
  double loss = 0.0;
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < y.rows(); ++k) {
      alpha[static_cast<std::size_t>(k)] = softplus(y(k, c));
      a[static_cast<std::size_t>(k)] = samples(k, c);
      total += alpha[static_cast<std::size_t>(k)];
    }
    loss -= dirichlet_log_density(a, alpha) * adv(c) / b;
    const double psi_total = boost::math::digamma(total);
    for (Eigen::Index k = 0; k < y.rows(); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double dlogp = psi_total - boost::math::digamma(alpha[kk]) +
                           std::log(std::max(a[kk], std::numeric_limits<double>::min()));
      dy(k, c) = -adv(c) * dlogp * softplus_derivative(y(k, c)) / b;
    }
  }
  net_.backward(cache, dy, grad);
  return loss;
}

void DirichletPolicy::to_json(nlohmann::json& j) const {
  j = nlohmann::json{{"kind", lobexec::to_string(kind())}, {"network", net_}};
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, int obs_dim, int simplex_dim, Rng& init_rng) {
  if (kind == PolicyKind::LogisticNormal) {
    return std::make_unique<LogisticNormalPolicy>(obs_dim, simplex_dim, init_rng);
  }
  return std::make_unique<DirichletPolicy>(obs_dim, simplex_dim, init_rng);
}

std::unique_ptr<Policy> policy_from_json(const nlohmann::json& j) {
  const PolicyKind kind = parse_policy_kind(j.at("kind").get<std::string>());
  nn::Mlp net = j.at("network").get<nn::Mlp>();
  if (kind == PolicyKind::LogisticNormal) {
    return std::make_unique<LogisticNormalPolicy>(std::move(net), j.at("variance").get<double>());
  }
  return std::make_unique<DirichletPolicy>(std::move(net));
}

std::string_view to_string(HeuristicKind k) noexcept { return k == HeuristicKind::SubmitAndLeave ? "sl" : "twap"; }

HeuristicKind parse_heuristic_kind(std::string_view name) {
  if (name == "sl") return HeuristicKind::SubmitAndLeave;
  if (name == "twap") return HeuristicKind::Twap;
  throw std::invalid_argument("unknown benchmark '" + std::string(name) + "' (expected sl or twap)");
}

Lots heuristic_lots(HeuristicKind kind, int step, Lots total, int steps) {
  if (steps < 1 || step < 0 || step >= steps) {
    throw std::out_of_range("heuristic step outside 0..N-1");
  }
  if (kind == HeuristicKind::SubmitAndLeave) return step == 0 ? total : 0;
  const Lots base = total / steps;
  const Lots extra = total % steps;
  return base + (step < extra ? 1 : 0);
}

} // namespace lobexec
