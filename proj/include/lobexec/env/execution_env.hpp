#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "lobexec/lob/order_book.hpp"
#include "lobexec/market/config.hpp"
#include "lobexec/market/market.hpp"
#include "lobexec/market/shape.hpp"

namespace lobexec {

struct EnvConfig {
  int lots = 20;           ///< M
  int steps = 10;          ///< N
  double dt = 15.0;        ///< seconds between decisions
  int simplex_dim = 6;     ///< K
  MarketConfig market;
  StationaryShape shape;
  Price initial_bid = 1000; ///< at -dt
  Price initial_ask = 1001;
  double queue_normalizer = 50.0;
  double price_normalizer = 10.0;
  int max_reset_attempts = 16;

  double horizon() const noexcept { return dt * steps; }
  void validate() const;
};

using Observation = std::vector<double>;

/// Index ranges of the observation vector.
struct ObservationLayout {
  int bid_price = 0;
  int ask_price = 1;
  int bid_volumes = 2;  ///< K-1 entries
  int ask_volumes = 0;  ///< K-1 entries
  int market_flow = 0;
  int limit_flow = 0;
  int mid_drift = 0;
  int time_frac = 0;
  int inventory_frac = 0;
  int active_frac = 0;
  int level_codes = 0;  ///< M entries
  int queue_codes = 0;  ///< M entries
  int level_fractions = 0; ///< K entries
  int size = 0;

  static ObservationLayout make(int lots, int simplex_dim);
};

/// Raw market and private state at a decision time.
struct RawState {
  Price best_bid = 0;
  Price best_ask = 0;
  std::vector<Lots> bid_volumes; ///< K-1 levels
  std::vector<Lots> ask_volumes;
  FlowWindow flow;
  double mid = 0.0;
  double previous_mid = 0.0;
  double time = 0.0;
  Lots inventory = 0;            ///< M(t): resting + withheld
  std::vector<AgentLotState> active; ///< ordered by (price, queue)
};

struct NormalizationContext {
  int lots = 0;
  int simplex_dim = 0;
  double horizon = 0.0;
  Price reference_bid = 0;
  Price reference_ask = 0;
  const StationaryShape* shape = nullptr;
  double queue_normalizer = 50.0;
  double price_normalizer = 10.0;
};

Observation normalize_observation(const RawState& raw, const NormalizationContext& ctx);

/// Sequential rounding of a simplex allocation. Entries 0..K-1 are rounded
/// half away from zero, each clipped so the running total stays within the
/// inventory; the last entry takes the remainder.
std::vector<Lots> round_allocation(std::span<const double> action, Lots inventory);

/// Projects a nonnegative vector onto the simplex by renormalization.
std::vector<double> normalize_action(std::span<const double> action);

struct StepInfo {
  Lots lots_sold = 0;        ///< gamma_n
  Lots market_lots = 0;      ///< sold by this step's market order
  Lots passive_lots = 0;     ///< agent limit lots filled during the step
  Lots forced_lots = 0;      ///< sold by terminal liquidation
  Lots forced_unfilled = 0;  ///< liquidation remainder left by insufficient depth
  Lots cancelled = 0;
  Lots placed = 0;
  std::int64_t cash = 0;     ///< ticks
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EpisodeAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The seller's execution problem over N decision steps.
class ExecutionEnv {
public:
  ExecutionEnv(EnvConfig cfg, std::uint64_t seed);

  /// Starts a new episode, resampling (and counting aborts) if the warm-up
  /// empties a book side.
  Observation reset();
  Observation reset(std::uint64_t seed);

  /// Simplex action (K+1 entries). Throws EpisodeAborted when a book side
  /// empties; the episode must then be reset.
  StepResult step(std::span<const double> action);

  /// Places `lots` unit lots at the current best ask, with no cancellations
  /// and no market order. Used by the heuristic benchmarks.
  StepResult step_passive(Lots lots);

  int observation_dim() const noexcept { return layout_.size; }
  const ObservationLayout& layout() const noexcept { return layout_; }
  const EnvConfig& config() const noexcept { return cfg_; }

  int step_index() const noexcept { return step_; }
  bool done() const noexcept { return step_ >= cfg_.steps; }
  Lots inventory() const noexcept { return withheld_ + market_.book().agent_lots(); }
  Lots withheld() const noexcept { return withheld_; }
  Lots resting() const noexcept { return market_.book().agent_lots(); }
  Lots sold() const noexcept { return sold_; }
  std::int64_t total_cash() const noexcept { return total_cash_; }
  Price reference_bid() const noexcept { return reference_bid_; }
  std::uint64_t aborts() const noexcept { return aborts_; }
  bool liquidation_incomplete() const noexcept { return liquidation_incomplete_; }

  Market& market() noexcept { return market_; }
  const Market& market() const noexcept { return market_; }

  /// Order-management primitive shared by both step variants: applies the
  /// simplex allocation at the current time and returns the market-order
  /// result. Exposed for tests.
  StepInfo apply_action(std::span<const double> action);

  void set_trace(bool enabled) noexcept { trace_enabled_ = enabled; }
  /// CSV columns: step, action (semicolon separated), lots_sold, reward, inventory.
  void write_trace_csv(std::ostream& out) const;

private:
  struct TraceRow {
    int step = 0;
    std::vector<double> action;
    Lots lots_sold = 0;
    double reward = 0.0;
    Lots inventory = 0;
  };

  void start_episode();
  Observation observe();
  StepResult finish_step(StepInfo info, std::span<const double> action);
  Lots sell_at_market(Lots lots, StepInfo& info);
  void collect_passive_fills(StepInfo& info);

  EnvConfig cfg_;
  ObservationLayout layout_;
  Market market_;
  std::uint64_t aborts_ = 0;

  int step_ = 0;
  Lots withheld_ = 0;
  Lots sold_ = 0;
  std::int64_t total_cash_ = 0;
  Price reference_bid_ = 0;
  double previous_mid_ = 0.0;
  bool liquidation_incomplete_ = false;

  bool trace_enabled_ = false;
  std::vector<TraceRow> trace_;
};

} // namespace lobexec
