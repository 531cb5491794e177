#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lobexec {

using Price = std::int64_t; // ticks
using Lots = std::int64_t;
using OrderId = std::uint64_t;

enum class Side : std::uint8_t { Buy, Sell };
enum class Owner : std::uint8_t { Background, Agent };

constexpr Side opposite(Side s) noexcept { return s == Side::Buy ? Side::Sell : Side::Buy; }
const char* to_string(Side s) noexcept;
const char* to_string(Owner o) noexcept;

struct CrossingLimitOrder : std::logic_error {
  using std::logic_error::logic_error;
};
struct UnknownOrder : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct EmptySide : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LimitOrder {
  OrderId id = 0;
  Side side = Side::Buy;
  Price price = 0;
  Lots size = 0;
  Owner owner = Owner::Background;
  std::uint64_t seq = 0;
};

struct Fill {
  OrderId maker_order_id = 0;
  Owner maker_owner = Owner::Background;
  Side maker_side = Side::Buy;
  Price price = 0;
  Lots size = 0;
  double time = 0.0;
};

struct MarketOrderResult {
  std::vector<Fill> fills;
  Lots filled = 0;
  Lots unfilled = 0;
};

/// Relative depth view: bid[k] is the volume k ticks below the best bid,
/// ask[k] the volume k ticks above the best ask (zero-based k).
struct DepthSnapshot {
  std::vector<Lots> bid;
  std::vector<Lots> ask;
};

/// Position of one resting agent lot.
struct AgentLotState {
  OrderId id = 0;
  Price price = 0;
  std::int64_t level = 0; ///< 1 at the best ask
  Lots lots_ahead = 0;
};

/// Price-time priority book over unbounded integer tick prices.
///
/// Single-threaded. Agent lots are tracked individually so that their level
/// and queue position can be reported; background cancellations never touch
/// them.
class OrderBook {
public:
  OrderBook() = default;

  /// Appends a resting order. Throws CrossingLimitOrder if the order would
  /// trade on arrival.
  OrderId submit_limit(Side side, Price price, Lots size, Owner owner);

  /// Matches against the opposite side from the best price outward.
  MarketOrderResult submit_market(Side side, Lots size, Owner taker);

  Lots cancel_order(OrderId id);

  /// Removes up to `size` background lots at `price`, newest first, leaving
  /// agent orders in place. Returns the lots removed.
  Lots cancel_background_from_back(Side side, Price price, Lots size);

  /// Throws EmptySide if either side is empty.
  DepthSnapshot snapshot(int depth) const;
  void snapshot_into(std::span<Lots> bid, std::span<Lots> ask) const;

  /// Agent lots ordered by (price, seq). Throws EmptySide if agent lots rest
  /// while the ask side is empty.
  std::vector<AgentLotState> agent_order_states() const;

  std::optional<Price> best_bid() const;
  std::optional<Price> best_ask() const;
  bool empty(Side side) const { return side == Side::Buy ? bids_.empty() : asks_.empty(); }

  Lots volume_at(Side side, Price price) const;
  Lots total_volume(Side side) const;
  std::vector<LimitOrder> queue_at(Side side, Price price) const;
  std::vector<LimitOrder> all_orders() const;
  const LimitOrder* find(OrderId id) const;
  bool contains(OrderId id) const { return index_.contains(id); }

  Lots agent_lots() const noexcept { return agent_lots_; }
  std::vector<OrderId> agent_order_ids() const;

  /// Stamped onto fills.
  void set_time(double t) noexcept { time_ = t; }
  double time() const noexcept { return time_; }

  void set_fill_logging(bool enabled) noexcept { log_fills_ = enabled; }
  const std::vector<Fill>& fill_log() const noexcept { return fill_log_; }
  std::vector<Fill> drain_fills();
  void clear();

  /// CSV columns: time, maker_owner, side, price, size.
  void write_fill_log_csv(std::ostream& out) const;

private:
  struct Level {
    std::vector<LimitOrder> queue;
    Lots volume = 0;
  };
  using BidMap = std::map<Price, Level, std::greater<>>;
  using AskMap = std::map<Price, Level, std::less<>>;

  template <class Map>
  static void fill_relative(const Map& levels, Price best, int direction, std::span<Lots> out);

  template <class Map>
  void match(Map& levels, Side maker_side, Lots& remaining, MarketOrderResult& result);

  template <class Map>
  Lots cancel_from_back(Map& levels, Price price, Lots size);

  Level* level_for(Side side, Price price);

  BidMap bids_;
  AskMap asks_;
  std::unordered_map<OrderId, std::pair<Side, Price>> index_;
  OrderId next_id_ = 1;
  std::uint64_t seq_counter_ = 0;
  Lots agent_lots_ = 0;
  double time_ = 0.0;
  bool log_fills_ = true;
  std::vector<Fill> fill_log_;
};

} // namespace lobexec
