#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lobexec/lob/order_book.hpp"

namespace lobexec {

struct NoiseConfig {
  double lambda_market = 0.0;        ///< per side, 1/s
  std::vector<double> lambda_limit;  ///< k = 1..D, 1/s
  std::vector<double> lambda_cancel; ///< k = 1..D, 1/s per resting lot
  double sigma_market = 0.0;
  std::vector<double> sigma_limit;
  std::vector<double> sigma_cancel;
  double intensity_scale = 1.0;
};

struct TacticalConfig {
  double d_market = 0.0;
  std::vector<double> d_limit;
  std::vector<double> d_cancel;
  double damping = 0.65;
  double sigma_market = 0.0;
  std::vector<double> sigma_limit;
  std::vector<double> sigma_cancel;
  double intensity_scale = 1.0;
};

enum class Direction { Buy, Sell, RandomFair };

struct StrategicConfig {
  Lots market_size = 1;
  Lots limit_size = 2;
  double dt_market = 3.0;
  double dt_limit = 3.0;
  Direction direction = Direction::RandomFair;
  /// Multiplier on noise and tactical intensities while the strategic trader is active.
  double companion_scale = 0.9;
};

enum class MarketKind { Noise, NoiseTactical, NoiseTacticalStrategic };

std::string_view to_string(MarketKind kind) noexcept;
MarketKind parse_market_kind(std::string_view name);
std::string_view to_string(Direction d) noexcept;
Direction parse_direction(std::string_view name);

struct MarketConfig {
  int depth = 30;
  NoiseConfig noise;
  std::optional<TacticalConfig> tactical;
  std::optional<StrategicConfig> strategic;
  /// Strategic trader activity window [start, end).
  double strategic_start = -15.0;
  double strategic_end = 150.0;

  /// Throws std::invalid_argument on inconsistent dimensions or negative rates.
  void validate() const;
};

/// Noise-trader intensities: market 0.1237/s, limit and cancellation rates per
/// level for D = 30 (zero beyond level 13), all order sizes with sigma = 2.
NoiseConfig default_noise_config(int depth = 30);
/// Tactical traders with d = 2 on every channel and damping c = 0.65.
TacticalConfig default_tactical_config(int depth = 30);
StrategicConfig default_strategic_config();

/// The three simulated markets, including the noise/tactical intensity
/// reductions (x0.85 with tactical traders, a further x0.9 with the strategic
/// trader).
MarketConfig market_preset(MarketKind kind, int depth = 30);

/// The market whose equilibrium shape seeds and normalizes `cfg`: the
/// market itself, or for a strategic market the same noise and tactical
/// traders without the strategic trader and its companion scaling.
MarketConfig equilibrium_market(const MarketConfig& cfg);

} // namespace lobexec
