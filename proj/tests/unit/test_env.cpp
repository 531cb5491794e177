#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "lobexec/env/execution_env.hpp"
#include "env_helpers.hpp"
#include "market_helpers.hpp"

using namespace lobexec;
using test::noise_env;

namespace {

StationaryShape flat_shape(int depth, std::vector<double> bid, std::vector<double> ask) {
  StationaryShape s;
  s.depth = depth;
  s.v_bid = std::move(bid);
  s.v_ask = std::move(ask);
  s.spread = 1.0;
  s.samples = 1;
  return s;
}

/// Deterministic environment: no background activity, book shaped like the
/// reference book at 1000/1001.
EnvConfig silent_env(int lots, int simplex_dim) {
  EnvConfig cfg;
  cfg.lots = lots;
  cfg.simplex_dim = simplex_dim;
  cfg.market = test::silent_config(4);
  cfg.shape = flat_shape(4, {3, 4, 6, 5}, {2, 4, 5, 7});
  return cfg;
}

std::vector<double> random_action(int k, Rng& rng) {
  std::vector<double> a(static_cast<std::size_t>(k) + 1);
  for (double& x : a) x = rng.gamma(0.5);
  const double s = std::accumulate(a.begin(), a.end(), 0.0);
  if (s <= 0.0) {
    a.back() = 1.0;
    return a;
  }
  for (double& x : a) x /= s;
  return a;
}

} // namespace

TEST_SUITE("exec_env") {

TEST_CASE("sequential rounding") {
  const std::vector<double> a{0.1, 0.5, 0.3, 0.1};
  CHECK(round_allocation(a, 10) == std::vector<Lots>{1, 5, 3, 1});
  const std::vector<double> all_market{1.0, 0.0, 0.0, 0.0};
  CHECK(round_allocation(all_market, 10) == std::vector<Lots>{10, 0, 0, 0});
  const std::vector<double> thirds{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(round_allocation(thirds, 10) == std::vector<Lots>{3, 3, 4});
  const std::vector<double> halves{0.5, 0.5};
  CHECK(round_allocation(halves, 5) == std::vector<Lots>{3, 2});
  const std::vector<double> over{0.6, 0.6, 0.0};
  CHECK(round_allocation(over, 5) == std::vector<Lots>{3, 2, 0});
  CHECK(round_allocation(a, 0) == std::vector<Lots>{0, 0, 0, 0});

  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto x = random_action(5, rng);
    const Lots inv = static_cast<Lots>(rng.uniform() * 60);
    const auto n = round_allocation(x, inv);
    CHECK(std::accumulate(n.begin(), n.end(), Lots{0}) == inv);
    for (Lots v : n) CHECK(v >= 0);
  }
}

TEST_CASE("action normalization") {
  const std::vector<double> raw{2.0, 2.0, 0.0, -1.0};
  const auto a = normalize_action(raw);
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[3] == 0.0);
  const std::vector<double> bad{std::nan(""), 1.0};
  CHECK_THROWS_AS(normalize_action(bad), std::invalid_argument);
}

TEST_CASE("market slot sells into the bid") {
  ExecutionEnv env(silent_env(10, 3), 1);
  env.reset();
  const std::vector<double> a{0.3, 0.0, 0.0, 0.7};
  const StepInfo info = env.apply_action(a);
  CHECK(info.market_lots == 3);
  CHECK(info.cash == 3000);
  CHECK(env.market().book().volume_at(Side::Buy, 1000) == 0);
  CHECK(env.withheld() == 7);
}

TEST_CASE("reducing a target cancels the newest lots") {
  ExecutionEnv env(silent_env(10, 3), 1);
  env.reset();
  const std::vector<double> five{0.0, 0.5, 0.0, 0.5};
  env.apply_action(five);
  const auto before = env.market().book().agent_order_states();
  REQUIRE(before.size() == 5);
  const std::vector<double> three{0.0, 0.3, 0.0, 0.7};
  const StepInfo info = env.apply_action(three);
  CHECK(info.cancelled == 2);
  CHECK(info.placed == 0);
  const auto after = env.market().book().agent_order_states();
  REQUIRE(after.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(after[i].id == before[i].id);
    CHECK(after[i].lots_ahead == before[i].lots_ahead);
  }
}

TEST_CASE("repeating an action changes nothing") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    ExecutionEnv env(silent_env(20, 4), 1);
    env.reset();
    auto a = random_action(4, rng);
    a[0] = 0.0;
    env.apply_action(a);
    const auto before = env.market().book().agent_order_states();
    const StepInfo second = env.apply_action(a);
    CHECK(second.cancelled == 0);
    CHECK(second.placed == 0);
    const auto after = env.market().book().agent_order_states();
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].id == before[i].id);
  }
}

TEST_CASE("rewards are anchored at the initial bid") {
  SUBCASE("everything at the initial bid") {
    EnvConfig cfg = silent_env(20, 3);
    cfg.shape = flat_shape(4, {30, 30, 30, 30}, {30, 30, 30, 30});
    ExecutionEnv env(cfg, 1);
    env.reset();
    const std::vector<double> idle{0.0, 0.0, 0.0, 1.0};
    double total = 0.0;
    std::vector<double> rewards;
    while (!env.done()) {
      const StepResult r = env.step(idle);
      rewards.push_back(r.reward);
      total += r.reward;
    }
    CHECK(total == doctest::Approx(0.0));
    for (std::size_t i = 0; i + 1 < rewards.size(); ++i) CHECK(rewards[i] == 0.0);
    CHECK(env.sold() == 20);
  }
  SUBCASE("half one tick better") {
    EnvConfig cfg = silent_env(20, 3);
    cfg.shape = flat_shape(4, {30, 30, 30, 30}, {0, 30, 30, 30});
    StrategicConfig buyer;
    buyer.market_size = 10;
    buyer.limit_size = 0;
    buyer.dt_market = 1000.0;
    buyer.direction = Direction::Buy;
    cfg.market.strategic = buyer;
    cfg.market.strategic_start = 1.0;
    ExecutionEnv env(cfg, 1);
    env.reset();
    double total = 0.0;
    const std::vector<double> first{0.0, 0.5, 0.0, 0.5};
    const std::vector<double> idle{0.0, 0.0, 0.0, 1.0};
    StepResult r = env.step(first);
    CHECK(r.info.passive_lots == 10);
    total += r.reward;
    while (!env.done()) {
      r = env.step(idle);
      total += r.reward;
    }
    CHECK(r.done);
    CHECK(r.info.forced_lots == 10);
    CHECK(total == doctest::Approx(0.5));
  }
}

TEST_CASE("idle policy is paid only by the forced liquidation") {
  ExecutionEnv env(noise_env(20), 4);
  env.reset(17);
  const std::vector<double> idle{0, 0, 0, 0, 0, 0, 1};
  StepResult r;
  while (!env.done()) {
    r = env.step(idle);
    if (!r.done) {
      CHECK(r.reward == 0.0);
      CHECK(r.info.lots_sold == 0);
    }
  }
  CHECK(r.info.forced_lots == 20);
}

TEST_CASE("episode accounting on the noise market") {
  Rng rng(12);
  ExecutionEnv env(noise_env(20), 2);
  int episodes = 0;
  for (std::uint64_t seed = 1; episodes < 200; ++seed) {
    try {
      Observation obs = env.reset(seed);
      double total = 0.0;
      int steps = 0;
      while (!env.done()) {
        const auto a = random_action(6, rng);
        const StepResult r = env.step(a);
        CHECK(std::isfinite(r.reward));
        CHECK(r.done == (steps == env.config().steps - 1));
        CHECK(env.resting() + env.withheld() + env.sold() == 20);
        total += r.reward;
        ++steps;
      }
      CHECK(env.inventory() == 0);
      CHECK(total == doctest::Approx(static_cast<double>(env.total_cash() - 20 * env.reference_bid()) / 20.0));
      ++episodes;
    } catch (const EpisodeAborted&) {
    }
  }
}

TEST_CASE("initial observation") {
  ExecutionEnv a(noise_env(20), 1);
  ExecutionEnv b(noise_env(20), 99);
  const Observation oa = a.reset(42);
  const Observation ob = b.reset(42);
  CHECK(oa == ob);
  const ObservationLayout& l = a.layout();
  CHECK(a.observation_dim() == 2 + 2 * 5 + 3 + 3 + 2 * 20 + 6);
  CHECK(oa[static_cast<std::size_t>(l.time_frac)] == 0.0);
  CHECK(oa[static_cast<std::size_t>(l.inventory_frac)] == 1.0);
  CHECK(oa[static_cast<std::size_t>(l.active_frac)] == 0.0);
  for (int k = 0; k < 5; ++k) CHECK(oa[static_cast<std::size_t>(l.level_fractions + k)] == 0.0);
  CHECK(oa[static_cast<std::size_t>(l.level_fractions + 5)] == 1.0);

  int within = 0;
  const int resets = 2000;
  for (int i = 0; i < resets; ++i) {
    const Observation o = a.reset(1000 + static_cast<std::uint64_t>(i));
    if (std::abs(o[0]) <= 0.5 && std::abs(o[1]) <= 0.5) ++within;
  }
  CHECK(within > 0.99 * resets);
}

TEST_CASE("observation normalization") {
  StationaryShape shape = flat_shape(6, {3, 3, 3, 3, 3, 3}, {2, 2, 2, 2, 2, 0});
  NormalizationContext ctx;
  ctx.lots = 3;
  ctx.simplex_dim = 6;
  ctx.horizon = 150.0;
  ctx.reference_bid = 1000;
  ctx.reference_ask = 1001;
  ctx.shape = &shape;
  RawState raw;
  raw.best_bid = 1000;
  raw.best_ask = 1001;
  raw.bid_volumes = {3, 6, 0, 0, 0};
  raw.ask_volumes = {2, 4, 5, 7, 0};
  raw.mid = 1000.5;
  raw.previous_mid = 1000.5;
  raw.time = 75.0;
  raw.inventory = 3;
  raw.active = {AgentLotState{1, 1002, 2, 3}, AgentLotState{2, 1003, 3, 5}};
  const Observation o = normalize_observation(raw, ctx);
  const ObservationLayout l = ObservationLayout::make(3, 6);
  CHECK(o[0] == 0.0);
  CHECK(o[1] == 0.0);
  CHECK(o[static_cast<std::size_t>(l.bid_volumes)] == 1.0);
  CHECK(o[static_cast<std::size_t>(l.bid_volumes + 1)] == 2.0);
  CHECK(o[static_cast<std::size_t>(l.market_flow)] == 0.0);
  CHECK(o[static_cast<std::size_t>(l.limit_flow)] == 0.0);
  CHECK(o[static_cast<std::size_t>(l.time_frac)] == 0.5);
  CHECK(o[static_cast<std::size_t>(l.active_frac)] == doctest::Approx(2.0 / 3.0));
  const std::vector<double> levels(o.begin() + l.level_codes, o.begin() + l.level_codes + 3);
  const std::vector<double> queues(o.begin() + l.queue_codes, o.begin() + l.queue_codes + 3);
  CHECK(levels == std::vector<double>{2.0 / 6, 3.0 / 6, 1.0});
  CHECK(queues == std::vector<double>{3.0 / 50, 5.0 / 50, 1.0});
  CHECK(o[static_cast<std::size_t>(l.level_fractions + 1)] == doctest::Approx(1.0 / 3));
  CHECK(o[static_cast<std::size_t>(l.level_fractions + 5)] == doctest::Approx(1.0 / 3));

  raw.inventory = 2;
  raw.active = {AgentLotState{1, 1002, 2, 3}};
  const Observation filled = normalize_observation(raw, ctx);
  CHECK(filled[static_cast<std::size_t>(l.level_codes + 2)] == -1.0);
  CHECK(filled[static_cast<std::size_t>(l.queue_codes + 2)] == -1.0);
}

TEST_CASE("observation bounds over random episodes") {
  Rng rng(77);
  ExecutionEnv env(noise_env(20), 6);
  const ObservationLayout& l = env.layout();
  const auto in = [](double x, double lo, double hi) { return x >= lo && x <= hi; };
  int episodes = 0;
  for (std::uint64_t seed = 1; episodes < 2000; ++seed) {
    try {
      Observation obs = env.reset(seed);
      for (;;) {
        CHECK(obs.size() == static_cast<std::size_t>(l.size));
        CHECK(in(obs[static_cast<std::size_t>(l.market_flow)], -1.0, 1.0));
        CHECK(in(obs[static_cast<std::size_t>(l.limit_flow)], -1.0, 1.0));
        for (int f : {l.time_frac, l.inventory_frac, l.active_frac}) CHECK(in(obs[static_cast<std::size_t>(f)], 0.0, 1.0));
        double gamma = 0.0;
        for (int k = 0; k < 6; ++k) gamma += obs[static_cast<std::size_t>(l.level_fractions + k)];
        const bool empty = obs[static_cast<std::size_t>(l.inventory_frac)] == 0.0;
        CHECK(gamma == doctest::Approx(empty ? 0.0 : 1.0));
        for (int i = 0; i < 20; ++i) {
          const double code = obs[static_cast<std::size_t>(l.level_codes + i)];
          CHECK((code == -1.0 || code >= 1.0 / 6));
          CHECK(obs[static_cast<std::size_t>(l.queue_codes + i)] >= -1.0);
        }
        for (double x : obs) CHECK(std::isfinite(x));
        if (env.done()) break;
        obs = env.step(random_action(6, rng)).observation;
      }
      ++episodes;
    } catch (const EpisodeAborted&) {
    }
  }
}

TEST_CASE("passive placement matches the equivalent allocation") {
  int compared = 0;
  for (std::uint64_t seed = 1; compared < 50; ++seed) {
    ExecutionEnv a(noise_env(20), 3);
    ExecutionEnv b(noise_env(20), 3);
    a.reset(seed);
    b.reset(seed);
    const OrderBook& book = a.market().book();
    if (*book.best_ask() - *book.best_bid() != 1) continue;
    const std::vector<double> at_ask{0, 1, 0, 0, 0, 0, 0};
    const StepResult ra = a.step_passive(20);
    const StepResult rb = b.step(at_ask);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.info.passive_lots == rb.info.passive_lots);
    CHECK(ra.observation == rb.observation);
    ++compared;
  }
}

TEST_CASE("episode trace") {
  ExecutionEnv env(silent_env(10, 3), 1);
  env.set_trace(true);
  env.reset();
  const std::vector<double> idle{0.0, 0.0, 0.0, 1.0};
  while (!env.done()) env.step(idle);
  std::ostringstream out;
  env.write_trace_csv(out);
  const std::string csv = out.str();
  CHECK(csv.rfind("step,action,lots_sold,reward,inventory\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}

TEST_CASE("configuration checks") {
  EnvConfig cfg = silent_env(10, 3);
  cfg.simplex_dim = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = silent_env(0, 3);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

}
