#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "lobexec/policy/policy.hpp"
#include "lobexec/policy/simplex.hpp"

using namespace lobexec;
using nn::Matrix;
using nn::Vector;

namespace {

double simplex_error(const std::vector<double>& a) {
  double s = 0.0;
  double neg = 0.0;
  for (double x : a) {
    s += x;
    neg = std::min(neg, x);
  }
  return std::max(std::abs(s - 1.0), -neg);
}

PolicyNetConfig small_net() {
  PolicyNetConfig c;
  c.hidden_width = 12;
  return c;
}

} // namespace

TEST_SUITE("policy") {

TEST_CASE("logistic transform") {
  const std::vector<double> zero{0.0, 0.0};
  for (double v : logistic(zero)) CHECK(v == doctest::Approx(1.0 / 3));
  const std::vector<double> x{std::log(2.0), 0.0};
  const auto a = logistic(x);
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.25));
  CHECK(a[2] == doctest::Approx(0.25));
  const std::vector<double> huge{1e6, 0.0, -3.0};
  const auto s = logistic(huge);
  CHECK(s[0] == 1.0);
  for (double v : s) CHECK(std::isfinite(v));
  CHECK(s[3] == 0.0);
}

TEST_CASE("logistic inverse") {
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  for (double v : logistic_inv(uniform)) CHECK(v == 0.0);
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> alpha(5, 1.0);
    const auto a = sample_dirichlet(alpha, rng);
    if (*std::min_element(a.begin(), a.end()) <= 0.0) continue;
    const auto back = logistic(logistic_inv(a));
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(back[k] - a[k]) < 1e-12);
  }
  const std::vector<double> boundary{0.5, 0.0, 0.5};
  CHECK_THROWS_AS(logistic_inv(boundary), BoundaryPoint);
}

TEST_CASE("softplus") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(softplus(20.0) - 20.0) < 1e-8);
  CHECK(softplus(-20.0) == doctest::Approx(std::exp(-20.0)).epsilon(1e-8));
  CHECK(std::isfinite(softplus(1000.0)));
  CHECK(softplus(softplus_inv(10.0)) == doctest::Approx(10.0));
  CHECK(softplus_derivative(0.0) == doctest::Approx(0.5));
}

TEST_CASE("variance schedule") {
  CHECK(variance_schedule(1, 400, 1.0, 0.1) == 1.0);
  CHECK(variance_schedule(400, 400, 1.0, 0.1) == doctest::Approx(0.1));
  CHECK(variance_schedule(2, 3, 1.0, 0.1) == doctest::Approx(0.55));
  CHECK_THROWS(variance_schedule(0, 3, 1.0, 0.1));
  CHECK_THROWS(variance_schedule(4, 3, 1.0, 0.1));
  CHECK_THROWS(variance_schedule(1, 1, 1.0, 0.1));
}

TEST_CASE("logistic-normal density") {
  const std::vector<double> a{0.5, 0.5};
  const std::vector<double> mu{0.0};
  const std::vector<double> var{1.0};
  CHECK(ln_full_log_density(a, mu, var) == doctest::Approx(std::log(1.0 / (0.25 * std::sqrt(2.0 * std::numbers::pi)))));
  const std::vector<double> edge{1.0, 0.0};
  CHECK_THROWS_AS(ln_full_log_density(edge, mu, var), BoundaryPoint);

  SUBCASE("integrates to one") {
    Rng rng(2);
    const std::vector<double> m{0.2, -0.3};
    const std::vector<double> v{0.5, 0.5};
    const std::vector<double> ones(3, 1.0);
    const int n = 400000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto p = sample_dirichlet(ones, rng);
      // Dir(1, 1, 1) has density 2 on the 2-simplex.
      const double w = std::exp(ln_full_log_density(p, m, v)) / 2.0;
      sum += w;
      sum2 += w * w;
    }
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.01));
  }

  SUBCASE("mean gradient equals the normal density gradient") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> m(3);
      for (double& x : m) x = rng.normal();
      const std::vector<double> v(3, 0.7);
      std::vector<double> x(3);
      for (std::size_t k = 0; k < 3; ++k) x[k] = m[k] + std::sqrt(0.7) * rng.normal();
      const auto p = logistic(x);
      for (std::size_t k = 0; k < 3; ++k) {
        const double h = 1e-6;
        auto up = m;
        auto down = m;
        up[k] += h;
        down[k] -= h;
        const double full = (ln_full_log_density(p, up, v) - ln_full_log_density(p, down, v)) / (2 * h);
        const double normal = (normal_log_density(x, up, 0.7) - normal_log_density(x, down, 0.7)) / (2 * h);
        CHECK(full == doctest::Approx(normal).epsilon(1e-6));
        CHECK(normal == doctest::Approx((x[k] - m[k]) / 0.7).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("logistic-normal sampling") {
  Rng init(4);
  LogisticNormalPolicy policy(8, 3, init, -1.0, 1.0, small_net());
  const std::vector<double> obs(8, 0.3);
  const auto mu = policy.mean(obs);

  SUBCASE("initial mean is the bias") {
    for (double m : mu) CHECK(m == doctest::Approx(-1.0).epsilon(1e-3));
  }
  SUBCASE("log-ratio moments") {
    Rng rng(5);
    const int n = 200000;
    std::vector<double> s(3, 0.0);
    double s01 = 0.0;
    std::vector<double> s2(3, 0.0);
    for (int i = 0; i < n; ++i) {
      const PolicySample p = policy.sample(obs, rng);
      CHECK(simplex_error(p.action) < 1e-9);
      std::vector<double> r(3);
      for (int k = 0; k < 3; ++k) {
        r[k] = std::log(p.action[k] / p.action[3]);
        s[k] += r[k];
        s2[k] += r[k] * r[k];
      }
      s01 += r[0] * r[1];
    }
    for (int k = 0; k < 3; ++k) {
      const double mean = s[k] / n;
      const double sd = std::sqrt(s2[k] / n - mean * mean);
      CHECK(std::abs(mean - mu[k]) < 3.0 * sd / std::sqrt(n));
      CHECK(sd == doctest::Approx(1.0).epsilon(0.01));
    }
    const double cov = s01 / n - (s[0] / n) * (s[1] / n);
    CHECK(std::abs(cov) < 3.0 / std::sqrt(n) * 1.0);
  }
  SUBCASE("vanishing variance gives the mean action") {
    policy.set_variance(1e-30);
    Rng rng(6);
    const auto a = policy.sample(obs, rng).action;
    const auto m = policy.mean_action(obs);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(m[k]).epsilon(1e-12));
  }
  SUBCASE("stored log density matches the batch evaluation") {
    Rng rng(7);
    const PolicySample p = policy.sample(obs, rng);
    const Matrix o = Eigen::Map<const Vector>(obs.data(), 8);
    const Matrix x = Eigen::Map<const Vector>(p.pre_sample.data(), 3);
    CHECK(policy.log_density(o, x)(0) == doctest::Approx(p.log_density));
    CHECK(p.log_density == doctest::Approx(normal_log_density(p.pre_sample, mu, 1.0)));
  }
  SUBCASE("determinism") {
    Rng a(8);
    Rng b(8);
    CHECK(policy.sample(obs, a).action == policy.sample(obs, b).action);
  }
}

TEST_CASE("dirichlet policy") {
  Rng init(9);
  DirichletPolicy policy(8, 3, init, 10.0, small_net());
  const std::vector<double> obs(8, -0.2);
  const auto alpha = policy.concentration(obs);
  for (int k = 0; k < 3; ++k) CHECK(alpha[k] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(alpha[3] == doctest::Approx(10.0).epsilon(1e-3));

  Rng rng(10);
  const int n = 200000;
  std::vector<double> s(4, 0.0);
  std::vector<double> s2(4, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto a = sample_dirichlet(alpha, rng);
    CHECK(simplex_error(a) < 1e-9);
    for (int k = 0; k < 4; ++k) {
      s[k] += a[k];
      s2[k] += a[k] * a[k];
    }
  }
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  for (int k = 0; k < 4; ++k) {
    const double mean = s[k] / n;
    const double sd = std::sqrt(s2[k] / n - mean * mean);
    CHECK(std::abs(mean - alpha[k] / total) < 3.0 * sd / std::sqrt(n));
  }

  const auto m = policy.mean_action(obs);
  double reference = std::lgamma(total);
  for (int k = 0; k < 4; ++k) reference += -std::lgamma(alpha[k]) + (alpha[k] - 1.0) * std::log(m[k]);
  CHECK(std::abs(dirichlet_log_density(m, alpha) - reference) < 1e-10);
}

TEST_CASE("policy loss gradients match central differences") {
  Rng rng(11);
  for (PolicyKind kind : {PolicyKind::LogisticNormal, PolicyKind::Dirichlet}) {
    for (int trial = 0; trial < 10; ++trial) {
      Rng init(100 + static_cast<std::uint64_t>(trial));
      std::unique_ptr<Policy> policy;
      if (kind == PolicyKind::LogisticNormal) {
        policy = std::make_unique<LogisticNormalPolicy>(6, 3, init, -1.0, 0.4, small_net());
      } else {
        policy = std::make_unique<DirichletPolicy>(6, 3, init, 10.0, small_net());
      }
      test::randomize(policy->network(), 0.4, rng);
      const int batch = 8;
      const Matrix obs = test::random_matrix(6, batch, 1.0, rng);
      Matrix samples(policy->sample_dim(), batch);
      for (int b = 0; b < batch; ++b) {
        const Vector o = obs.col(b);
        const PolicySample p = policy->sample(std::span<const double>(o.data(), 6), rng);
        for (int k = 0; k < policy->sample_dim(); ++k) samples(k, b) = p.pre_sample[static_cast<std::size_t>(k)];
      }
      const Vector adv = test::random_matrix(batch, 1, 1.0, rng).col(0);
      Vector grad = Vector::Zero(static_cast<Eigen::Index>(policy->network().parameter_count()));
      policy->loss_and_gradient(obs, samples, adv, grad);
      Vector scratch = grad;
      const Vector fd = test::finite_difference(policy->network(), [&] {
        scratch.setZero();
        return policy->loss_and_gradient(obs, samples, adv, scratch);
      });
      CHECK(test::relative_error(grad, fd) < 1e-4);
    }
  }
}

TEST_CASE("policy serialization") {
  Rng init(12);
  for (PolicyKind kind : {PolicyKind::LogisticNormal, PolicyKind::Dirichlet}) {
    auto policy = make_policy(kind, 10, 4, init);
    policy->set_variance(0.37);
    nlohmann::json j;
    policy->to_json(j);
    const auto back = policy_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back->kind() == kind);
    CHECK(back->network().parameters() == policy->network().parameters());
    CHECK(back->variance() == policy->variance());
    CHECK(back->simplex_dim() == 4);
  }
  CHECK(parse_policy_kind("ln") == PolicyKind::LogisticNormal);
  CHECK(parse_policy_kind("dirichlet") == PolicyKind::Dirichlet);
  CHECK_THROWS(parse_policy_kind("gaussian"));
}

TEST_CASE("heuristic schedules") {
  CHECK(heuristic_lots(HeuristicKind::SubmitAndLeave, 0, 20, 10) == 20);
  for (int n = 1; n < 10; ++n) CHECK(heuristic_lots(HeuristicKind::SubmitAndLeave, n, 20, 10) == 0);
  for (int n = 0; n < 10; ++n) CHECK(heuristic_lots(HeuristicKind::Twap, n, 20, 10) == 2);
  std::vector<Lots> twap;
  for (int n = 0; n < 10; ++n) twap.push_back(heuristic_lots(HeuristicKind::Twap, n, 25, 10));
  CHECK(twap == std::vector<Lots>{3, 3, 3, 3, 3, 2, 2, 2, 2, 2});
  CHECK(parse_heuristic_kind("sl") == HeuristicKind::SubmitAndLeave);
  CHECK(parse_heuristic_kind("twap") == HeuristicKind::Twap);
}

}
