#include "lobexec/env/execution_env.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace lobexec {

void EnvConfig::validate() const {
  if (lots < 1) throw std::invalid_argument("env.lots must be >= 1");
  if (steps < 1) throw std::invalid_argument("env.steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("env.dt must be > 0");
  if (simplex_dim < 1) throw std::invalid_argument("env.simplex_dim must be >= 1");
  if (simplex_dim > market.depth) throw std::invalid_argument("env.simplex_dim must not exceed the book depth");
  if (shape.depth < simplex_dim - 1) throw std::invalid_argument("stationary shape is shallower than K-1 levels");
  if (initial_ask <= initial_bid) throw std::invalid_argument("initial ask must exceed initial bid");
  market.validate();
}

ObservationLayout ObservationLayout::make(int lots, int simplex_dim) {
  ObservationLayout l;
  const int levels = simplex_dim - 1;
  l.bid_price = 0;
  l.ask_price = 1;
  l.bid_volumes = 2;
  l.ask_volumes = l.bid_volumes + levels;
  l.market_flow = l.ask_volumes + levels;
  l.limit_flow = l.market_flow + 1;
  l.mid_drift = l.limit_flow + 1;
  l.time_frac = l.mid_drift + 1;
  l.inventory_frac = l.time_frac + 1;
  l.active_frac = l.inventory_frac + 1;
  l.level_codes = l.active_frac + 1;
  l.queue_codes = l.level_codes + lots;
  l.level_fractions = l.queue_codes + lots;
  l.size = l.level_fractions + simplex_dim;
  return l;
}

Observation normalize_observation(const RawState& raw, const NormalizationContext& ctx) {
  const ObservationLayout l = ObservationLayout::make(ctx.lots, ctx.simplex_dim);
  Observation obs(static_cast<std::size_t>(l.size), 0.0);
  auto at = [&](int i) -> double& { return obs[static_cast<std::size_t>(i)]; };
  const int K = ctx.simplex_dim;

  at(l.bid_price) = static_cast<double>(raw.best_bid - ctx.reference_bid) / ctx.price_normalizer;
  at(l.ask_price) = static_cast<double>(raw.best_ask - ctx.reference_ask) / ctx.price_normalizer;
  for (int k = 0; k < K - 1; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double vb = ctx.shape->v_bid[idx];
    const double va = ctx.shape->v_ask[idx];
    at(l.bid_volumes + k) = vb > 0.0 ? static_cast<double>(raw.bid_volumes[idx]) / vb : 0.0;
    at(l.ask_volumes + k) = va > 0.0 ? static_cast<double>(raw.ask_volumes[idx]) / va : 0.0;
  }
  at(l.market_flow) = raw.flow.normalized_market_flow();
  at(l.limit_flow) = raw.flow.normalized_limit_flow();
  at(l.mid_drift) = raw.previous_mid != 0.0 ? (raw.mid - raw.previous_mid) / raw.previous_mid : 0.0;

  const auto inventory = static_cast<double>(raw.inventory);
  const auto active = static_cast<Lots>(raw.active.size());
  at(l.time_frac) = raw.time / ctx.horizon;
  at(l.inventory_frac) = inventory / static_cast<double>(ctx.lots);
  at(l.active_frac) = raw.inventory > 0 ? static_cast<double>(active) / inventory : 0.0;

  const Lots withheld = raw.inventory - active;
  Lots slot = 0;
  std::vector<Lots> per_level(static_cast<std::size_t>(K) + 1, 0);
  for (const AgentLotState& s : raw.active) {
    at(l.level_codes + static_cast<int>(slot)) = static_cast<double>(s.level) / K;
    at(l.queue_codes + static_cast<int>(slot)) = static_cast<double>(s.lots_ahead) / ctx.queue_normalizer;
    ++slot;
    if (s.level >= 1 && s.level <= K - 1) {
      ++per_level[static_cast<std::size_t>(s.level)];
    } else {
      ++per_level[static_cast<std::size_t>(K)];
    }
  }
  for (Lots u = 0; u < withheld; ++u, ++slot) {
    at(l.level_codes + static_cast<int>(slot)) = 1.0;
    at(l.queue_codes + static_cast<int>(slot)) = 1.0;
  }
  for (; slot < ctx.lots; ++slot) {
    at(l.level_codes + static_cast<int>(slot)) = -1.0;
    at(l.queue_codes + static_cast<int>(slot)) = -1.0;
  }
  per_level[static_cast<std::size_t>(K)] += withheld;
  if (raw.inventory > 0) {
    for (int k = 1; k <= K; ++k) {
      at(l.level_fractions + k - 1) = static_cast<double>(per_level[static_cast<std::size_t>(k)]) / inventory;
    }
  }
  return obs;
}

std::vector<double> normalize_action(std::span<const double> action) {
  std::vector<double> a(action.begin(), action.end());
  double sum = 0.0;
  for (double& x : a) {
    if (!std::isfinite(x)) throw std::invalid_argument("action contains a non-finite entry");
    x = std::max(x, 0.0);
    sum += x;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("action must have positive mass");
  for (double& x : a) x /= sum;
  return a;
}

std::vector<Lots> round_allocation(std::span<const double> action, Lots inventory) {
  if (inventory < 0) throw std::invalid_argument("round_allocation: negative inventory");
  if (action.empty()) throw std::invalid_argument("round_allocation: empty action");
  std::vector<Lots> out(action.size(), 0);
  Lots allocated = 0;
  for (std::size_t k = 0; k + 1 < action.size(); ++k) {
    const Lots wanted = static_cast<Lots>(std::llround(action[k] * static_cast<double>(inventory)));
    out[k] = std::clamp<Lots>(wanted, 0, inventory - allocated);
    allocated += out[k];
  }
  out.back() = inventory - allocated;
  return out;
}

ExecutionEnv::ExecutionEnv(EnvConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), layout_(ObservationLayout::make(cfg_.lots, cfg_.simplex_dim)), market_(cfg_.market, seed) {
  cfg_.validate();
}

Observation ExecutionEnv::reset(std::uint64_t seed) {
  market_.reseed(seed);
  return reset();
}

Observation ExecutionEnv::reset() {
  for (int attempt = 0; attempt < cfg_.max_reset_attempts; ++attempt) {
    try {
      start_episode();
      return observe();
    } catch (const EmptySide&) {
      ++aborts_;
    }
  }
  throw EpisodeAborted("reset: warm-up emptied a book side on every attempt");
}

void ExecutionEnv::start_episode() {
  market_.reset(-cfg_.dt);
  populate_book(market_.book(), cfg_.shape, cfg_.initial_bid, cfg_.initial_ask);
  previous_mid_ = 0.5 * static_cast<double>(cfg_.initial_bid + cfg_.initial_ask);
  market_.advance(0.0);
  market_.book().drain_fills();
  const std::optional<Price> bid = market_.book().best_bid();
  if (!bid || !market_.book().best_ask()) throw EmptySide("book side empty at t = 0");
  reference_bid_ = *bid;
  step_ = 0;
  withheld_ = cfg_.lots;
  sold_ = 0;
  total_cash_ = 0;
  liquidation_incomplete_ = false;
  trace_.clear();
}

Observation ExecutionEnv::observe() {
  const OrderBook& book = market_.book();
  const int levels = std::max(cfg_.simplex_dim - 1, 1);
  const DepthSnapshot snap = book.snapshot(levels);
  RawState raw;
  raw.best_bid = *book.best_bid();
  raw.best_ask = *book.best_ask();
  raw.bid_volumes = snap.bid;
  raw.ask_volumes = snap.ask;
  raw.flow = market_.take_flow();
  raw.mid = 0.5 * static_cast<double>(raw.best_bid + raw.best_ask);
  raw.previous_mid = previous_mid_;
  raw.time = market_.clock();
  raw.inventory = inventory();
  raw.active = book.agent_order_states();
  previous_mid_ = raw.mid;

  NormalizationContext ctx;
  ctx.lots = cfg_.lots;
  ctx.simplex_dim = cfg_.simplex_dim;
  ctx.horizon = cfg_.horizon();
  ctx.reference_bid = cfg_.initial_bid;
  ctx.reference_ask = cfg_.initial_ask;
  ctx.shape = &cfg_.shape;
  ctx.queue_normalizer = cfg_.queue_normalizer;
  ctx.price_normalizer = cfg_.price_normalizer;
  return normalize_observation(raw, ctx);
}

Lots ExecutionEnv::sell_at_market(Lots lots, StepInfo& info) {
  if (lots <= 0) return 0;
  const MarketOrderResult result = market_.book().submit_market(Side::Sell, lots, Owner::Agent);
  for (const Fill& f : result.fills) info.cash += f.price * f.size;
  withheld_ -= result.filled;
  return result.filled;
}

void ExecutionEnv::collect_passive_fills(StepInfo& info) {
  for (const Fill& f : market_.book().drain_fills()) {
    if (f.maker_owner == Owner::Agent) {
      info.cash += f.price * f.size;
      info.passive_lots += f.size;
    }
  }
}

StepInfo ExecutionEnv::apply_action(std::span<const double> action) {
  if (static_cast<int>(action.size()) != cfg_.simplex_dim + 1) {
    throw std::invalid_argument("action must have K+1 entries");
  }
  OrderBook& book = market_.book();
  book.drain_fills();
  const std::vector<double> a = normalize_action(action);
  const std::vector<Lots> alloc = round_allocation(a, inventory());
  const std::optional<Price> best_bid = book.best_bid();
  if (!best_bid) throw EmptySide("bid side empty at decision time");
  const Price bid = *best_bid;
  const int K = cfg_.simplex_dim;
  auto target_at = [&](Price price) -> Lots {
    const Price k = price - bid;
    return k >= 1 && k <= K - 1 ? alloc[static_cast<std::size_t>(k)] : 0;
  };

  StepInfo info;
  // Group resting lots by price; within a price they are in queue order.
  std::map<Price, std::vector<OrderId>> resting;
  for (const AgentLotState& s : book.agent_order_states()) {
    resting[s.price].push_back(s.id);
  }
  std::map<Price, Lots> kept;
  for (auto& [price, ids] : resting) {
    const Lots keep = std::min<Lots>(target_at(price), static_cast<Lots>(ids.size()));
    for (auto i = static_cast<std::size_t>(keep); i < ids.size(); ++i) {
      // Highest queue positions go first.
      book.cancel_order(ids[ids.size() - 1 - (i - static_cast<std::size_t>(keep))]);
      ++withheld_;
      ++info.cancelled;
    }
    kept[price] = keep;
  }

  info.market_lots = sell_at_market(alloc[0], info);

  for (int k = 1; k <= K - 1; ++k) {
    const Price price = bid + k;
    const Lots need = alloc[static_cast<std::size_t>(k)] - (kept.contains(price) ? kept[price] : 0);
    for (Lots i = 0; i < need; ++i) {
      book.submit_limit(Side::Sell, price, 1, Owner::Agent);
      --withheld_;
      ++info.placed;
    }
  }
  return info;
}

StepResult ExecutionEnv::step(std::span<const double> action) {
  if (done()) throw std::logic_error("step called on a finished episode");
  try {
    StepInfo info = apply_action(action);
    return finish_step(info, action);
  } catch (const EmptySide& e) {
    throw EpisodeAborted(e.what());
  }
}

StepResult ExecutionEnv::step_passive(Lots lots) {
  if (done()) throw std::logic_error("step called on a finished episode");
  try {
    StepInfo info;
    OrderBook& book = market_.book();
    book.drain_fills();
    const std::optional<Price> ask = book.best_ask();
    if (!ask) throw EmptySide("ask side empty at decision time");
    const Lots n = std::min(lots, withheld_);
    for (Lots i = 0; i < n; ++i) {
      book.submit_limit(Side::Sell, *ask, 1, Owner::Agent);
      --withheld_;
      ++info.placed;
    }
    const std::vector<double> marker{static_cast<double>(n)};
    return finish_step(info, marker);
  } catch (const EmptySide& e) {
    throw EpisodeAborted(e.what());
  }
}

StepResult ExecutionEnv::finish_step(StepInfo info, std::span<const double> action) {
  market_.advance(static_cast<double>(step_ + 1) * cfg_.dt);
  collect_passive_fills(info);

  if (step_ == cfg_.steps - 1) {
    OrderBook& book = market_.book();
    for (OrderId id : book.agent_order_ids()) {
      withheld_ += book.cancel_order(id);
    }
    const Lots remaining = withheld_;
    info.forced_lots = sell_at_market(remaining, info);
    info.forced_unfilled = remaining - info.forced_lots;
    liquidation_incomplete_ = info.forced_unfilled > 0;
    book.drain_fills();
  }

  info.lots_sold = info.market_lots + info.passive_lots + info.forced_lots;
  sold_ += info.lots_sold;
  total_cash_ += info.cash;

  StepResult result;
  result.info = info;
  result.reward = static_cast<double>(info.cash - info.lots_sold * reference_bid_) / static_cast<double>(cfg_.lots);
  ++step_;
  result.done = step_ == cfg_.steps;
  result.observation = observe();
  if (trace_enabled_) {
    trace_.push_back({step_ - 1, std::vector<double>(action.begin(), action.end()), info.lots_sold, result.reward,
                      inventory()});
  }
  return result;
}

void ExecutionEnv::write_trace_csv(std::ostream& out) const {
  out << "step,action,lots_sold,reward,inventory\n";
  for (const TraceRow& row : trace_) {
    out << row.step << ',';
    for (std::size_t i = 0; i < row.action.size(); ++i) {
      out << (i ? ";" : "") << row.action[i];
    }
    out << ',' << row.lots_sold << ',' << row.reward << ',' << row.inventory << '\n';
  }
}

} // namespace lobexec
