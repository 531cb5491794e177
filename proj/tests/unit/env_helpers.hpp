#pragma once

#include "lobexec/env/execution_env.hpp"
#include "lobexec/market/shape.hpp"

namespace lobexec::test {

inline const StationaryShape& noise_shape() {
  static const StationaryShape shape = [] {
    ShapeEstimationOptions o;
    o.seed = 5;
    return estimate_stationary_shape(market_preset(MarketKind::Noise), o);
  }();
  return shape;
}

inline EnvConfig noise_env(int lots) {
  EnvConfig cfg;
  cfg.lots = lots;
  cfg.market = market_preset(MarketKind::Noise);
  cfg.shape = noise_shape();
  return cfg;
}

} // namespace lobexec::test
