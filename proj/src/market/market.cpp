#include "lobexec/market/market.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lobexec {

const char* to_string(Trader t) noexcept {
  switch (t) {
  case Trader::Noise: return "noise";
  case Trader::Tactical: return "tactical";
  case Trader::Strategic: return "strategic";
  }
  return "noise";
}

const char* to_string(EventKind k) noexcept {
  switch (k) {
  case EventKind::MarketBuy: return "market_buy";
  case EventKind::MarketSell: return "market_sell";
  case EventKind::LimitBuy: return "limit_buy";
  case EventKind::LimitSell: return "limit_sell";
  case EventKind::CancelBuy: return "cancel_buy";
  case EventKind::CancelSell: return "cancel_sell";
  }
  return "market_buy";
}

namespace {

constexpr double kSizeCapInSigmas = 5.0;

void append_trader_channels(std::vector<Channel>& out, Trader trader, int depth) {
  out.push_back({trader, EventKind::MarketBuy, 0});
  out.push_back({trader, EventKind::MarketSell, 0});
  for (EventKind kind : {EventKind::LimitBuy, EventKind::LimitSell, EventKind::CancelBuy, EventKind::CancelSell}) {
    for (int k = 1; k <= depth; ++k) {
      out.push_back({trader, kind, k});
    }
  }
}

/// Writes one trader block of 2 + 4D rates.
/// `up` multiplies buy-market/buy-limit/sell-cancel channels, `down` the
/// mirrored ones (both 1 for noise traders, I+ and I- for tactical traders).
void fill_block(double* out, double scale, double market, std::span<const double> limit,
                std::span<const double> cancel, double up, double down, std::span<const Lots> bid,
                std::span<const Lots> ask, Price spread) {
  const auto depth = static_cast<int>(limit.size());
  out[0] = scale * market * up;
  out[1] = scale * market * down;
  double* limit_buy = out + 2;
  double* limit_sell = limit_buy + depth;
  double* cancel_buy = limit_sell + depth;
  double* cancel_sell = cancel_buy + depth;
  for (int k = 1; k <= depth; ++k) {
    const double l = scale * limit[static_cast<std::size_t>(k - 1)];
    limit_buy[k - 1] = l * up;
    limit_sell[k - 1] = l * down;
    if (k < spread) {
      cancel_buy[k - 1] = 0.0;
      cancel_sell[k - 1] = 0.0;
    } else {
      const double c = scale * cancel[static_cast<std::size_t>(k - 1)];
      const auto idx = static_cast<std::size_t>(k - spread);
      cancel_buy[k - 1] = c * down * static_cast<double>(bid[idx]);
      cancel_sell[k - 1] = c * up * static_cast<double>(ask[idx]);
    }
  }
}

void compute_rates(const MarketConfig& cfg, std::span<const Lots> bid, std::span<const Lots> ask, Price spread,
                   std::vector<double>& rates) {
  const auto block = static_cast<std::size_t>(2 + 4 * cfg.depth);
  rates.resize(cfg.tactical ? 2 * block : block);
  const NoiseConfig& n = cfg.noise;
  fill_block(rates.data(), n.intensity_scale, n.lambda_market, n.lambda_limit, n.lambda_cancel, 1.0, 1.0, bid, ask,
             spread);
  if (cfg.tactical) {
    const TacticalConfig& t = *cfg.tactical;
    const double imbalance = weighted_imbalance(bid, ask, t.damping);
    const double plus = std::max(imbalance, 0.0);
    const double minus = std::max(-imbalance, 0.0);
    fill_block(rates.data() + block, t.intensity_scale, t.d_market, t.d_limit, t.d_cancel, plus, minus, bid, ask,
               spread);
  }
}

} // namespace

std::vector<Channel> channel_layout(const MarketConfig& cfg) {
  std::vector<Channel> out;
  append_trader_channels(out, Trader::Noise, cfg.depth);
  if (cfg.tactical) {
    append_trader_channels(out, Trader::Tactical, cfg.depth);
  }
  return out;
}

double weighted_imbalance(std::span<const Lots> bid, std::span<const Lots> ask, double damping) {
  double vb = 0.0;
  double va = 0.0;
  double weight = 1.0;
  const double decay = std::exp(-damping);
  const std::size_t depth = std::min(bid.size(), ask.size());
  for (std::size_t k = 0; k < depth; ++k) {
    vb += static_cast<double>(bid[k]) * weight;
    va += static_cast<double>(ask[k]) * weight;
    weight *= decay;
  }
  const double total = vb + va;
  return total > 0.0 ? (vb - va) / total : 0.0;
}

double weighted_imbalance(const OrderBook& book, int depth, double damping) {
  const DepthSnapshot snap = book.snapshot(depth);
  return weighted_imbalance(snap.bid, snap.ask, damping);
}

std::vector<ChannelRate> channel_rates(const OrderBook& book, const MarketConfig& cfg) {
  const DepthSnapshot snap = book.snapshot(cfg.depth);
  std::vector<double> rates;
  compute_rates(cfg, snap.bid, snap.ask, *book.best_ask() - *book.best_bid(), rates);
  const std::vector<Channel> layout = channel_layout(cfg);
  std::vector<ChannelRate> out(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    out[i] = {layout[i], rates[i]};
  }
  return out;
}

Lots draw_order_size(double sigma, Rng& rng) {
  const double z = std::fabs(rng.normal());
  const double extra = std::min(sigma * z, kSizeCapInSigmas * sigma);
  return static_cast<Lots>(std::llround(1.0 + extra));
}

double FlowWindow::normalized_market_flow() const noexcept {
  const Lots total = market_buy + market_sell;
  return total == 0 ? 0.0 : static_cast<double>(market_net()) / static_cast<double>(total);
}

double FlowWindow::normalized_limit_flow() const noexcept {
  const Lots total = limit_buy + limit_sell;
  return total == 0 ? 0.0 : static_cast<double>(limit_net()) / static_cast<double>(total);
}

Market::Market(MarketConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
  layout_ = channel_layout(cfg_);
  rates_.reserve(layout_.size());
  bid_depth_.assign(static_cast<std::size_t>(cfg_.depth), 0);
  ask_depth_.assign(static_cast<std::size_t>(cfg_.depth), 0);
}

void Market::reset(double clock) {
  book_.clear();
  clock_ = clock;
  book_.set_time(clock);
  flow_ = {};
  traded_volume_ = 0;
  event_count_ = 0;
  event_log_.clear();
  next_strategic_market_ = std::numeric_limits<double>::infinity();
  next_strategic_limit_ = std::numeric_limits<double>::infinity();
  if (!cfg_.strategic) {
    return;
  }
  const StrategicConfig& s = *cfg_.strategic;
  switch (s.direction) {
  case Direction::Buy: strategic_side_ = Side::Buy; break;
  case Direction::Sell: strategic_side_ = Side::Sell; break;
  case Direction::RandomFair: strategic_side_ = rng_.uniform() < 0.5 ? Side::Buy : Side::Sell; break;
  }
  auto first_index = [&](double dt) {
    return clock <= cfg_.strategic_start ? 0L : static_cast<long>(std::ceil((clock - cfg_.strategic_start) / dt));
  };
  strategic_market_index_ = first_index(s.dt_market);
  strategic_limit_index_ = first_index(s.dt_limit);
  auto time_of = [&](long idx, double dt) {
    const double t = cfg_.strategic_start + static_cast<double>(idx) * dt;
    return t < cfg_.strategic_end ? t : std::numeric_limits<double>::infinity();
  };
  if (s.market_size > 0) next_strategic_market_ = time_of(strategic_market_index_, s.dt_market);
  if (s.limit_size > 0) next_strategic_limit_ = time_of(strategic_limit_index_, s.dt_limit);
}

FlowWindow Market::take_flow() {
  FlowWindow out = flow_;
  flow_ = {};
  return out;
}

double Market::next_strategic_time() const noexcept {
  return std::min(next_strategic_market_, next_strategic_limit_);
}

double Market::refresh_rates() {
  book_.snapshot_into(bid_depth_, ask_depth_);
  const Price spread = *book_.best_ask() - *book_.best_bid();
  compute_rates(cfg_, bid_depth_, ask_depth_, spread, rates_);
  double total = 0.0;
  for (double r : rates_) total += r;
  return total;
}

void Market::advance(double until, const Observer& observer) {
  if (until < clock_) {
    throw std::invalid_argument("advance: target time precedes the clock");
  }
  for (;;) {
    const double total = refresh_rates();
    const double strategic_at = next_strategic_time();
    const double wait = total > 0.0 ? rng_.exponential(total) : std::numeric_limits<double>::infinity();
    const double event_at = clock_ + wait;

    if (strategic_at <= until && strategic_at <= event_at) {
      if (observer) observer(*this, strategic_at - clock_);
      clock_ = strategic_at;
      book_.set_time(clock_);
      execute_strategic(next_strategic_market_ <= next_strategic_limit_);
      continue;
    }
    if (event_at > until) {
      if (observer) observer(*this, until - clock_);
      clock_ = until;
      book_.set_time(clock_);
      return;
    }
    if (observer) observer(*this, wait);
    clock_ = event_at;
    book_.set_time(clock_);

    const double target = rng_.uniform() * total;
    double cumulative = 0.0;
    std::size_t chosen = rates_.size();
    for (std::size_t i = 0; i < rates_.size(); ++i) {
      cumulative += rates_[i];
      if (target < cumulative) {
        chosen = i;
        break;
      }
    }
    if (chosen == rates_.size()) {
      // Rounding left target at the total; take the last positive channel.
      for (std::size_t i = rates_.size(); i-- > 0;) {
        if (rates_[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    execute(layout_[chosen]);
    ++event_count_;
  }
}

void Market::execute(const Channel& ch) {
  const bool tactical = ch.trader == Trader::Tactical;
  const NoiseConfig& n = cfg_.noise;
  const auto k = static_cast<std::size_t>(ch.level > 0 ? ch.level - 1 : 0);
  const double sigma_market = tactical ? cfg_.tactical->sigma_market : n.sigma_market;
  const double sigma_limit = tactical ? cfg_.tactical->sigma_limit[k] : n.sigma_limit[k];
  const double sigma_cancel = tactical ? cfg_.tactical->sigma_cancel[k] : n.sigma_cancel[k];
  const Price bid = *book_.best_bid();
  const Price ask = *book_.best_ask();

  switch (ch.kind) {
  case EventKind::MarketBuy:
  case EventKind::MarketSell: {
    const Side side = ch.kind == EventKind::MarketBuy ? Side::Buy : Side::Sell;
    const Lots size = draw_order_size(sigma_market, rng_);
    const MarketOrderResult result = book_.submit_market(side, size, Owner::Background);
    (side == Side::Buy ? flow_.market_buy : flow_.market_sell) += result.filled;
    traded_volume_ += result.filled;
    record(ch.trader, ch.kind, 0, result.filled);
    break;
  }
  case EventKind::LimitBuy: {
    const Lots size = draw_order_size(sigma_limit, rng_);
    book_.submit_limit(Side::Buy, ask - ch.level, size, Owner::Background);
    flow_.limit_buy += size;
    record(ch.trader, ch.kind, ask - ch.level, size);
    break;
  }
  case EventKind::LimitSell: {
    const Lots size = draw_order_size(sigma_limit, rng_);
    book_.submit_limit(Side::Sell, bid + ch.level, size, Owner::Background);
    flow_.limit_sell += size;
    record(ch.trader, ch.kind, bid + ch.level, size);
    break;
  }
  case EventKind::CancelBuy: {
    const Lots size = draw_order_size(sigma_cancel, rng_);
    const Lots removed = book_.cancel_background_from_back(Side::Buy, ask - ch.level, size);
    record(ch.trader, ch.kind, ask - ch.level, removed);
    break;
  }
  case EventKind::CancelSell: {
    const Lots size = draw_order_size(sigma_cancel, rng_);
    const Lots removed = book_.cancel_background_from_back(Side::Sell, bid + ch.level, size);
    record(ch.trader, ch.kind, bid + ch.level, removed);
    break;
  }
  }
}

void Market::execute_strategic(bool market_order) {
  const StrategicConfig& s = *cfg_.strategic;
  const bool buyer = strategic_side_ == Side::Buy;
  auto time_of = [&](long idx, double dt) {
    const double t = cfg_.strategic_start + static_cast<double>(idx) * dt;
    return t < cfg_.strategic_end ? t : std::numeric_limits<double>::infinity();
  };
  if (market_order) {
    const MarketOrderResult result = book_.submit_market(strategic_side_, s.market_size, Owner::Background);
    (buyer ? flow_.market_buy : flow_.market_sell) += result.filled;
    traded_volume_ += result.filled;
    record(Trader::Strategic, buyer ? EventKind::MarketBuy : EventKind::MarketSell, 0, result.filled);
    next_strategic_market_ = time_of(++strategic_market_index_, s.dt_market);
  } else {
    // Joins the quote on its own side.
    const std::optional<Price> quote = buyer ? book_.best_bid() : book_.best_ask();
    if (!quote) {
      throw EmptySide("strategic trader found its own side empty");
    }
    book_.submit_limit(strategic_side_, *quote, s.limit_size, Owner::Background);
    (buyer ? flow_.limit_buy : flow_.limit_sell) += s.limit_size;
    record(Trader::Strategic, buyer ? EventKind::LimitBuy : EventKind::LimitSell, *quote, s.limit_size);
    next_strategic_limit_ = time_of(++strategic_limit_index_, s.dt_limit);
  }
}

void Market::record(Trader trader, EventKind kind, Price price, Lots size) {
  if (log_events_) {
    event_log_.push_back({clock_, trader, kind, price, size});
  }
}

void Market::write_event_log_csv(std::ostream& out) const {
  out << "time,agent,kind,side,price,size\n";
  for (const MarketEvent& e : event_log_) {
    const bool buy = e.kind == EventKind::MarketBuy || e.kind == EventKind::LimitBuy || e.kind == EventKind::CancelBuy;
    const char* kind = "cancel";
    if (e.kind == EventKind::MarketBuy || e.kind == EventKind::MarketSell) kind = "market";
    if (e.kind == EventKind::LimitBuy || e.kind == EventKind::LimitSell) kind = "limit";
    out << e.time << ',' << to_string(e.trader) << ',' << kind << ',' << (buy ? "buy" : "sell") << ',' << e.price
        << ',' << e.size << '\n';
  }
}

} // namespace lobexec
