#include "lobexec/lob/order_book.hpp"

#include <algorithm>
#include <ostream>

namespace lobexec {

const char* to_string(Side s) noexcept { return s == Side::Buy ? "buy" : "sell"; }
const char* to_string(Owner o) noexcept { return o == Owner::Agent ? "agent" : "background"; }

OrderId OrderBook::submit_limit(Side side, Price price, Lots size, Owner owner) {
  if (size < 1) {
    throw std::invalid_argument("submit_limit: size must be >= 1");
  }
  if (side == Side::Buy) {
    if (!asks_.empty() && price >= asks_.begin()->first) {
      throw CrossingLimitOrder("buy limit at " + std::to_string(price) + " crosses best ask " +
                               std::to_string(asks_.begin()->first));
    }
  } else if (!bids_.empty() && price <= bids_.begin()->first) {
    throw CrossingLimitOrder("sell limit at " + std::to_string(price) + " crosses best bid " +
                             std::to_string(bids_.begin()->first));
  }

  const OrderId id = next_id_++;
  LimitOrder order{id, side, price, size, owner, ++seq_counter_};
  Level& level = side == Side::Buy ? bids_[price] : asks_[price];
  level.queue.push_back(order);
  level.volume += size;
  index_.emplace(id, std::make_pair(side, price));
  if (owner == Owner::Agent) {
    agent_lots_ += size;
  }
  return id;
}

template <class Map>
void OrderBook::match(Map& levels, Side maker_side, Lots& remaining, MarketOrderResult& result) {
  while (remaining > 0 && !levels.empty()) {
    auto it = levels.begin();
    Level& level = it->second;
    auto& queue = level.queue;
    std::size_t consumed = 0;
    while (remaining > 0 && consumed < queue.size()) {
      LimitOrder& maker = queue[consumed];
      const Lots take = std::min(remaining, maker.size);
      maker.size -= take;
      level.volume -= take;
      remaining -= take;
      result.filled += take;
      if (maker.owner == Owner::Agent) {
        agent_lots_ -= take;
      }
      Fill fill{maker.id, maker.owner, maker_side, maker.price, take, time_};
      result.fills.push_back(fill);
      if (log_fills_) {
        fill_log_.push_back(fill);
      }
      if (maker.size == 0) {
        index_.erase(maker.id);
        ++consumed;
      }
    }
    queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(consumed));
    if (queue.empty()) {
      levels.erase(it);
    }
  }
}

MarketOrderResult OrderBook::submit_market(Side side, Lots size, Owner /*taker*/) {
  if (size < 1) {
    throw std::invalid_argument("submit_market: size must be >= 1");
  }
  MarketOrderResult result;
  Lots remaining = size;
  if (side == Side::Buy) {
    match(asks_, Side::Sell, remaining, result);
  } else {
    match(bids_, Side::Buy, remaining, result);
  }
  result.unfilled = remaining;
  return result;
}

OrderBook::Level* OrderBook::level_for(Side side, Price price) {
  if (side == Side::Buy) {
    auto it = bids_.find(price);
    return it == bids_.end() ? nullptr : &it->second;
  }
  auto it = asks_.find(price);
  return it == asks_.end() ? nullptr : &it->second;
}

Lots OrderBook::cancel_order(OrderId id) {
  auto found = index_.find(id);
  if (found == index_.end()) {
    throw UnknownOrder("cancel_order: unknown order id " + std::to_string(id));
  }
  const auto [side, price] = found->second;
  Level* level = level_for(side, price);
  auto& queue = level->queue;
  auto it = std::find_if(queue.begin(), queue.end(), [id](const LimitOrder& o) { return o.id == id; });
  const Lots removed = it->size;
  if (it->owner == Owner::Agent) {
    agent_lots_ -= removed;
  }
  level->volume -= removed;
  queue.erase(it);
  index_.erase(found);
  if (queue.empty()) {
    if (side == Side::Buy) {
      bids_.erase(price);
    } else {
      asks_.erase(price);
    }
  }
  return removed;
}

template <class Map>
Lots OrderBook::cancel_from_back(Map& levels, Price price, Lots size) {
  auto it = levels.find(price);
  if (it == levels.end()) {
    return 0;
  }
  Level& level = it->second;
  auto& queue = level.queue;
  Lots removed = 0;
  for (std::size_t i = queue.size(); i-- > 0 && removed < size;) {
    LimitOrder& order = queue[i];
    if (order.owner == Owner::Agent) {
      continue;
    }
    const Lots take = std::min(size - removed, order.size);
    order.size -= take;
    removed += take;
    if (order.size == 0) {
      index_.erase(order.id);
      queue.erase(queue.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  level.volume -= removed;
  if (queue.empty()) {
    levels.erase(it);
  }
  return removed;
}

Lots OrderBook::cancel_background_from_back(Side side, Price price, Lots size) {
  if (size < 1) {
    throw std::invalid_argument("cancel_background_from_back: size must be >= 1");
  }
  return side == Side::Buy ? cancel_from_back(bids_, price, size) : cancel_from_back(asks_, price, size);
}

template <class Map>
void OrderBook::fill_relative(const Map& levels, Price best, int direction, std::span<Lots> out) {
  std::fill(out.begin(), out.end(), Lots{0});
  const auto depth = static_cast<Price>(out.size());
  for (const auto& [price, level] : levels) {
    const Price offset = (price - best) * direction;
    if (offset >= depth) {
      break;
    }
    out[static_cast<std::size_t>(offset)] = level.volume;
  }
}

void OrderBook::snapshot_into(std::span<Lots> bid, std::span<Lots> ask) const {
  if (bids_.empty() || asks_.empty()) {
    throw EmptySide(bids_.empty() ? "bid side is empty" : "ask side is empty");
  }
  fill_relative(bids_, bids_.begin()->first, -1, bid);
  fill_relative(asks_, asks_.begin()->first, +1, ask);
}

DepthSnapshot OrderBook::snapshot(int depth) const {
  DepthSnapshot snap{std::vector<Lots>(static_cast<std::size_t>(depth)),
                     std::vector<Lots>(static_cast<std::size_t>(depth))};
  snapshot_into(snap.bid, snap.ask);
  return snap;
}

std::vector<AgentLotState> OrderBook::agent_order_states() const {
  std::vector<AgentLotState> states;
  if (agent_lots_ == 0) {
    return states;
  }
  if (asks_.empty()) {
    throw EmptySide("ask side is empty while agent lots rest");
  }
  const Price best_ask = asks_.begin()->first;
  for (const auto& [price, level] : asks_) {
    Lots ahead = 0;
    for (const LimitOrder& order : level.queue) {
      if (order.owner == Owner::Agent) {
        for (Lots unit = 0; unit < order.size; ++unit) {
          states.push_back({order.id, price, price - best_ask + 1, ahead + unit});
        }
      }
      ahead += order.size;
    }
  }
  // Agent buy orders are not produced by the execution environment, but report
  // them with their ask-relative level for completeness.
  for (auto it = bids_.rbegin(); it != bids_.rend(); ++it) {
    Lots ahead = 0;
    for (const LimitOrder& order : it->second.queue) {
      if (order.owner == Owner::Agent) {
        for (Lots unit = 0; unit < order.size; ++unit) {
          states.push_back({order.id, it->first, it->first - best_ask + 1, ahead + unit});
        }
      }
      ahead += order.size;
    }
  }
  std::sort(states.begin(), states.end(), [](const AgentLotState& a, const AgentLotState& b) {
    return a.price != b.price ? a.price < b.price : a.lots_ahead < b.lots_ahead;
  });
  return states;
}

std::optional<Price> OrderBook::best_bid() const {
  if (bids_.empty()) {
    return std::nullopt;
  }
  return bids_.begin()->first;
}

std::optional<Price> OrderBook::best_ask() const {
  if (asks_.empty()) {
    return std::nullopt;
  }
  return asks_.begin()->first;
}

Lots OrderBook::volume_at(Side side, Price price) const {
  if (side == Side::Buy) {
    auto it = bids_.find(price);
    return it == bids_.end() ? 0 : it->second.volume;
  }
  auto it = asks_.find(price);
  return it == asks_.end() ? 0 : it->second.volume;
}

Lots OrderBook::total_volume(Side side) const {
  Lots total = 0;
  if (side == Side::Buy) {
    for (const auto& [p, level] : bids_) total += level.volume;
  } else {
    for (const auto& [p, level] : asks_) total += level.volume;
  }
  return total;
}

std::vector<LimitOrder> OrderBook::queue_at(Side side, Price price) const {
  if (side == Side::Buy) {
    auto it = bids_.find(price);
    return it == bids_.end() ? std::vector<LimitOrder>{} : it->second.queue;
  }
  auto it = asks_.find(price);
  return it == asks_.end() ? std::vector<LimitOrder>{} : it->second.queue;
}

std::vector<LimitOrder> OrderBook::all_orders() const {
  std::vector<LimitOrder> out;
  for (const auto& [p, level] : bids_) out.insert(out.end(), level.queue.begin(), level.queue.end());
  for (const auto& [p, level] : asks_) out.insert(out.end(), level.queue.begin(), level.queue.end());
  return out;
}

const LimitOrder* OrderBook::find(OrderId id) const {
  auto found = index_.find(id);
  if (found == index_.end()) {
    return nullptr;
  }
  const auto [side, price] = found->second;
  const auto& queue = side == Side::Buy ? bids_.at(price).queue : asks_.at(price).queue;
  for (const LimitOrder& o : queue) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

std::vector<OrderId> OrderBook::agent_order_ids() const {
  std::vector<OrderId> ids;
  for (const auto& order : all_orders()) {
    if (order.owner == Owner::Agent) ids.push_back(order.id);
  }
  return ids;
}

std::vector<Fill> OrderBook::drain_fills() {
  std::vector<Fill> out;
  out.swap(fill_log_);
  return out;
}

void OrderBook::clear() {
  bids_.clear();
  asks_.clear();
  index_.clear();
  fill_log_.clear();
  agent_lots_ = 0;
}

void OrderBook::write_fill_log_csv(std::ostream& out) const {
  out << "time,maker_owner,side,price,size\n";
  for (const Fill& f : fill_log_) {
    out << f.time << ',' << to_string(f.maker_owner) << ',' << to_string(f.maker_side) << ',' << f.price
        << ',' << f.size << '\n';
  }
}

} // namespace lobexec
