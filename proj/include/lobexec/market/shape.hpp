#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobexec/lob/order_book.hpp"
#include "lobexec/market/config.hpp"
#include "lobexec/parallel.hpp"

namespace lobexec {

/// Long-run average book: mean volume k-1 ticks behind each best quote and
/// the mean spread.
struct StationaryShape {
  int depth = 0;
  std::vector<double> v_bid;
  std::vector<double> v_ask;
  double spread = 1.0;
  int samples = 0;
  /// Standard error of each level average across samples: bid levels then ask levels.
  std::vector<double> stderr_levels;
  double spread_stderr = 0.0;
  int restarts = 0;
};

void to_json(nlohmann::json& j, const StationaryShape& s);
void from_json(const nlohmann::json& j, StationaryShape& s);
StationaryShape load_shape(const std::filesystem::path& path);
void save_shape(const std::filesystem::path& path, const StationaryShape& shape);

struct ShapeEstimationOptions {
  double burn_in = 500.0;  ///< seconds discarded per sample
  double horizon = 5000.0; ///< seconds averaged per sample
  int samples = 16;        ///< independent runs
  int max_restarts = 8;    ///< per sample, after an emptied book side
  std::uint64_t seed = 1;
  Execution execution = Execution::Parallel;
};

/// Initial book for estimation runs: lambda_limit / lambda_cancel lots per level.
StationaryShape intensity_ratio_shape(const NoiseConfig& noise, int depth);

/// Time-averaged relative volumes and spread over independent runs.
/// Rejects markets with a strategic trader; throws EmptySide when a sample
/// exhausts its restarts.
StationaryShape estimate_stationary_shape(const MarketConfig& cfg, const ShapeEstimationOptions& opts);

/// Rounded shape volumes as one background order per level, the bid side
/// starting at `best_bid` and the ask side at `best_ask`.
void populate_book(OrderBook& book, const StationaryShape& shape, Price best_bid, Price best_ask);

} // namespace lobexec
