#include "lobexec/market/config.hpp"

#include <array>
#include <stdexcept>

namespace lobexec {

namespace {

constexpr std::array<double, 13> kLimitIntensity{0.2842, 0.5255, 0.2971, 0.2307, 0.0826, 0.0682, 0.0631,
                                                 0.0481, 0.0462, 0.0321, 0.0178, 0.0015, 0.0001};
// Tabulated as 10 * lambda^{C,k}.
constexpr std::array<double, 13> kCancelIntensityTimesTen{0.8636, 0.4635, 0.1487, 0.1096, 0.0402, 0.0341, 0.0311,
                                                          0.0237, 0.0233, 0.0178, 0.0127, 0.0012, 0.0001};

constexpr double kMarketIntensity = 0.1237;
constexpr double kOrderSizeSigma = 2.0;
constexpr double kTacticalReaction = 2.0;
constexpr double kTacticalDamping = 0.65;
constexpr double kTacticalNoiseScale = 0.85;

void check_levels(const std::vector<double>& v, int depth, const char* name) {
  if (static_cast<int>(v.size()) != depth) {
    throw std::invalid_argument(std::string(name) + " must have one entry per level (" + std::to_string(depth) + ")");
  }
  for (double x : v) {
    if (!(x >= 0.0)) {
      throw std::invalid_argument(std::string(name) + " entries must be >= 0");
    }
  }
}

} // namespace

std::string_view to_string(MarketKind kind) noexcept {
  switch (kind) {
  case MarketKind::Noise: return "noise";
  case MarketKind::NoiseTactical: return "noise_tactical";
  case MarketKind::NoiseTacticalStrategic: return "noise_tactical_strategic";
  }
  return "noise";
}

MarketKind parse_market_kind(std::string_view name) {
  if (name == "noise") return MarketKind::Noise;
  if (name == "noise_tactical") return MarketKind::NoiseTactical;
  if (name == "noise_tactical_strategic") return MarketKind::NoiseTacticalStrategic;
  throw std::invalid_argument("unknown market kind '" + std::string(name) + "'");
}

std::string_view to_string(Direction d) noexcept {
  switch (d) {
  case Direction::Buy: return "buy";
  case Direction::Sell: return "sell";
  case Direction::RandomFair: return "random";
  }
  return "random";
}

Direction parse_direction(std::string_view name) {
  if (name == "buy") return Direction::Buy;
  if (name == "sell") return Direction::Sell;
  if (name == "random") return Direction::RandomFair;
  throw std::invalid_argument("unknown strategic direction '" + std::string(name) + "'");
}

void MarketConfig::validate() const {
  if (depth < 1) {
    throw std::invalid_argument("depth must be >= 1");
  }
  if (!(noise.lambda_market >= 0.0) || !(noise.sigma_market >= 0.0) || !(noise.intensity_scale >= 0.0)) {
    throw std::invalid_argument("noise rates, sizes and scale must be >= 0");
  }
  check_levels(noise.lambda_limit, depth, "noise.lambda_limit");
  check_levels(noise.lambda_cancel, depth, "noise.lambda_cancel");
  check_levels(noise.sigma_limit, depth, "noise.sigma_limit");
  check_levels(noise.sigma_cancel, depth, "noise.sigma_cancel");
  if (tactical) {
    if (!(tactical->damping > 0.0)) {
      throw std::invalid_argument("tactical.damping must be > 0");
    }
    if (!(tactical->d_market >= 0.0) || !(tactical->sigma_market >= 0.0) || !(tactical->intensity_scale >= 0.0)) {
      throw std::invalid_argument("tactical rates, sizes and scale must be >= 0");
    }
    check_levels(tactical->d_limit, depth, "tactical.d_limit");
    check_levels(tactical->d_cancel, depth, "tactical.d_cancel");
    check_levels(tactical->sigma_limit, depth, "tactical.sigma_limit");
    check_levels(tactical->sigma_cancel, depth, "tactical.sigma_cancel");
  }
  if (strategic) {
    if (strategic->market_size < 0 || strategic->limit_size < 0) {
      throw std::invalid_argument("strategic sizes must be >= 0");
    }
    if (!(strategic->dt_market > 0.0) || !(strategic->dt_limit > 0.0)) {
      throw std::invalid_argument("strategic intervals must be > 0");
    }
    if (!(strategic->companion_scale > 0.0)) {
      throw std::invalid_argument("strategic.companion_scale must be > 0");
    }
  }
}

NoiseConfig default_noise_config(int depth) {
  NoiseConfig cfg;
  cfg.lambda_market = kMarketIntensity;
  cfg.lambda_limit.assign(static_cast<std::size_t>(depth), 0.0);
  cfg.lambda_cancel.assign(static_cast<std::size_t>(depth), 0.0);
  for (std::size_t k = 0; k < kLimitIntensity.size() && k < cfg.lambda_limit.size(); ++k) {
    cfg.lambda_limit[k] = kLimitIntensity[k];
    cfg.lambda_cancel[k] = kCancelIntensityTimesTen[k] / 10.0;
  }
  cfg.sigma_market = kOrderSizeSigma;
  cfg.sigma_limit.assign(static_cast<std::size_t>(depth), kOrderSizeSigma);
  cfg.sigma_cancel.assign(static_cast<std::size_t>(depth), kOrderSizeSigma);
  return cfg;
}

TacticalConfig default_tactical_config(int depth) {
  TacticalConfig cfg;
  cfg.d_market = kTacticalReaction;
  cfg.d_limit.assign(static_cast<std::size_t>(depth), kTacticalReaction);
  cfg.d_cancel.assign(static_cast<std::size_t>(depth), kTacticalReaction);
  cfg.damping = kTacticalDamping;
  cfg.sigma_market = kOrderSizeSigma;
  cfg.sigma_limit.assign(static_cast<std::size_t>(depth), kOrderSizeSigma);
  cfg.sigma_cancel.assign(static_cast<std::size_t>(depth), kOrderSizeSigma);
  return cfg;
}

StrategicConfig default_strategic_config() { return StrategicConfig{}; }

MarketConfig market_preset(MarketKind kind, int depth) {
  MarketConfig cfg;
  cfg.depth = depth;
  cfg.noise = default_noise_config(depth);
  if (kind == MarketKind::Noise) {
    return cfg;
  }
  cfg.tactical = default_tactical_config(depth);
  cfg.noise.intensity_scale = kTacticalNoiseScale;
  if (kind == MarketKind::NoiseTacticalStrategic) {
    cfg.strategic = default_strategic_config();
    cfg.noise.intensity_scale *= cfg.strategic->companion_scale;
    cfg.tactical->intensity_scale *= cfg.strategic->companion_scale;
  }
  return cfg;
}

MarketConfig equilibrium_market(const MarketConfig& cfg) {
  MarketConfig out = cfg;
  if (!out.strategic) return out;
  const double scale = out.strategic->companion_scale;
  out.strategic.reset();
  out.noise.intensity_scale /= scale;
  if (out.tactical) out.tactical->intensity_scale /= scale;
  return out;
}

} // namespace lobexec
