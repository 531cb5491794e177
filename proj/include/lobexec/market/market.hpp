#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "lobexec/lob/order_book.hpp"
#include "lobexec/market/config.hpp"
#include "lobexec/rng.hpp"

namespace lobexec {

enum class Trader : std::uint8_t { Noise, Tactical, Strategic };
enum class EventKind : std::uint8_t { MarketBuy, MarketSell, LimitBuy, LimitSell, CancelBuy, CancelSell };

const char* to_string(Trader t) noexcept;
const char* to_string(EventKind k) noexcept;

/// One Poisson channel. `level` is k = 1..D for limit and cancel channels
/// (ticks from the opposite best quote), 0 for market channels.
struct Channel {
  Trader trader = Trader::Noise;
  EventKind kind = EventKind::MarketBuy;
  int level = 0;

  friend bool operator==(const Channel&, const Channel&) = default;
};

struct ChannelRate {
  Channel channel;
  double rate = 0.0;
};

/// Fixed channel order: per trader (noise, then tactical if configured)
/// market buy, market sell, limit buy k=1..D, limit sell k=1..D,
/// cancel buy k=1..D, cancel sell k=1..D.
std::vector<Channel> channel_layout(const MarketConfig& cfg);

/// Exponentially weighted depth imbalance in [-1, 1].
double weighted_imbalance(std::span<const Lots> bid, std::span<const Lots> ask, double damping);
double weighted_imbalance(const OrderBook& book, int depth, double damping);

/// Rates aligned with channel_layout(cfg). Throws EmptySide.
std::vector<ChannelRate> channel_rates(const OrderBook& book, const MarketConfig& cfg);

/// round(1 + sigma * min(|Z|, 5)), rounding half away from zero.
Lots draw_order_size(double sigma, Rng& rng);

/// Signed order flow accumulated over an observation window. Market volumes
/// count executed lots; limit volumes count submitted lots.
struct FlowWindow {
  Lots market_buy = 0;
  Lots market_sell = 0;
  Lots limit_buy = 0;
  Lots limit_sell = 0;

  Lots market_net() const noexcept { return market_buy - market_sell; }
  Lots limit_net() const noexcept { return limit_buy - limit_sell; }
  /// Net over total; 0 for an empty window.
  double normalized_market_flow() const noexcept;
  double normalized_limit_flow() const noexcept;
};

struct MarketEvent {
  double time = 0.0;
  Trader trader = Trader::Noise;
  EventKind kind = EventKind::MarketBuy;
  Price price = 0; ///< limit/cancel price; 0 for market orders
  Lots size = 0;   ///< executed, submitted or removed lots
};

/// Continuous-time simulation of noise, tactical and strategic traders on
/// one order book. Exact event-driven: after every event all channel rates
/// are recomputed, the next waiting time is Exp(total rate) and the channel
/// is chosen with one uniform against the cumulative rates. Strategic orders
/// fire on their deterministic schedule.
class Market {
public:
  /// Called before every state change with the time the current state has
  /// persisted. The book is unchanged over that interval.
  using Observer = std::function<void(const Market&, double duration)>;

  Market(MarketConfig cfg, std::uint64_t seed);

  /// Clears the book and counters, sets the clock, re-arms the strategic
  /// schedule and draws its direction. The caller then fills the book.
  void reset(double clock);
  void reseed(std::uint64_t seed) { rng_.reseed(seed); }

  /// Runs until `until` (inclusive for strategic orders scheduled at `until`).
  void advance(double until, const Observer& observer = {});

  double clock() const noexcept { return clock_; }
  OrderBook& book() noexcept { return book_; }
  const OrderBook& book() const noexcept { return book_; }
  const MarketConfig& config() const noexcept { return cfg_; }
  Rng& rng() noexcept { return rng_; }

  const FlowWindow& flow() const noexcept { return flow_; }
  FlowWindow take_flow();

  /// Background market-order volume executed since reset.
  Lots traded_volume() const noexcept { return traded_volume_; }
  std::uint64_t event_count() const noexcept { return event_count_; }
  /// Meaningful only when a strategic trader is configured.
  Side strategic_side() const noexcept { return strategic_side_; }

  /// Depth arrays from the most recent rate evaluation.
  std::span<const Lots> last_bid_depth() const noexcept { return bid_depth_; }
  std::span<const Lots> last_ask_depth() const noexcept { return ask_depth_; }

  void set_event_logging(bool enabled) noexcept { log_events_ = enabled; }
  const std::vector<MarketEvent>& event_log() const noexcept { return event_log_; }
  /// CSV columns: time, agent, kind, side, price, size.
  void write_event_log_csv(std::ostream& out) const;

private:
  double refresh_rates();
  void execute(const Channel& channel);
  void execute_strategic(bool market_order);
  void record(Trader trader, EventKind kind, Price price, Lots size);
  double next_strategic_time() const noexcept;

  MarketConfig cfg_;
  std::vector<Channel> layout_;
  std::vector<double> rates_;
  std::vector<Lots> bid_depth_;
  std::vector<Lots> ask_depth_;
  OrderBook book_;
  Rng rng_;
  double clock_ = 0.0;
  FlowWindow flow_;
  Lots traded_volume_ = 0;
  std::uint64_t event_count_ = 0;

  Side strategic_side_ = Side::Sell;
  double next_strategic_market_ = std::numeric_limits<double>::infinity();
  double next_strategic_limit_ = std::numeric_limits<double>::infinity();
  long strategic_market_index_ = 0;
  long strategic_limit_index_ = 0;

  bool log_events_ = false;
  std::vector<MarketEvent> event_log_;
};

} // namespace lobexec
