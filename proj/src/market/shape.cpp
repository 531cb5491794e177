#include "lobexec/market/shape.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lobexec/market/market.hpp"
#include "lobexec/rng.hpp"

namespace lobexec {

void to_json(nlohmann::json& j, const StationaryShape& s) {
  j = nlohmann::json{{"depth", s.depth},   {"v_tilde_bid", s.v_bid},     {"v_tilde_ask", s.v_ask},
                     {"s_tilde", s.spread}, {"samples", s.samples},      {"stderr", s.stderr_levels},
                     {"stderr_spread", s.spread_stderr}, {"restarts", s.restarts}};
}

void from_json(const nlohmann::json& j, StationaryShape& s) {
  s.depth = j.at("depth").get<int>();
  s.v_bid = j.at("v_tilde_bid").get<std::vector<double>>();
  s.v_ask = j.at("v_tilde_ask").get<std::vector<double>>();
  s.spread = j.at("s_tilde").get<double>();
  s.samples = j.value("samples", 0);
  s.stderr_levels = j.value("stderr", std::vector<double>{});
  s.spread_stderr = j.value("stderr_spread", 0.0);
  s.restarts = j.value("restarts", 0);
  if (static_cast<int>(s.v_bid.size()) != s.depth || static_cast<int>(s.v_ask.size()) != s.depth) {
    throw std::invalid_argument("shape: volume arrays must have `depth` entries");
  }
}

StationaryShape load_shape(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open shape file " + path.string());
  }
  return nlohmann::json::parse(in).get<StationaryShape>();
}

void save_shape(const std::filesystem::path& path, const StationaryShape& shape) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write shape file " + path.string());
  }
  out << nlohmann::json(shape).dump(2) << '\n';
}

StationaryShape intensity_ratio_shape(const NoiseConfig& noise, int depth) {
  StationaryShape shape;
  shape.depth = depth;
  shape.v_bid.assign(static_cast<std::size_t>(depth), 0.0);
  for (int k = 0; k < depth; ++k) {
    const double l = noise.lambda_limit[static_cast<std::size_t>(k)];
    const double c = noise.lambda_cancel[static_cast<std::size_t>(k)];
    if (l > 0.0) {
      shape.v_bid[static_cast<std::size_t>(k)] = c > 0.0 ? std::max(1.0, l / c) : 10.0;
    }
  }
  shape.v_ask = shape.v_bid;
  return shape;
}

void populate_book(OrderBook& book, const StationaryShape& shape, Price best_bid, Price best_ask) {
  for (int k = 0; k < shape.depth; ++k) {
    const auto lots_bid = static_cast<Lots>(std::llround(shape.v_bid[static_cast<std::size_t>(k)]));
    const auto lots_ask = static_cast<Lots>(std::llround(shape.v_ask[static_cast<std::size_t>(k)]));
    if (lots_bid > 0) book.submit_limit(Side::Buy, best_bid - k, lots_bid, Owner::Background);
    if (lots_ask > 0) book.submit_limit(Side::Sell, best_ask + k, lots_ask, Owner::Background);
  }
}

namespace {

struct SampleAverage {
  std::vector<double> bid;
  std::vector<double> ask;
  double spread = 0.0;
  int restarts = 0;
};

SampleAverage run_sample(const MarketConfig& cfg, const ShapeEstimationOptions& opts, std::size_t index) {
  const StationaryShape start = intensity_ratio_shape(cfg.noise, cfg.depth);
  const auto depth = static_cast<std::size_t>(cfg.depth);
  SampleAverage avg;
  for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
    Market market(cfg, derive_seed(opts.seed, "shape", index * 1000 + static_cast<std::size_t>(attempt)));
    market.book().set_fill_logging(false);
    market.reset(0.0);
    populate_book(market.book(), start, 1000, 1001);
    avg.bid.assign(depth, 0.0);
    avg.ask.assign(depth, 0.0);
    avg.spread = 0.0;
    try {
      market.advance(opts.burn_in);
      market.advance(opts.burn_in + opts.horizon, [&](const Market& m, double dt) {
        const auto bid = m.last_bid_depth();
        const auto ask = m.last_ask_depth();
        for (std::size_t k = 0; k < depth; ++k) {
          avg.bid[k] += dt * static_cast<double>(bid[k]);
          avg.ask[k] += dt * static_cast<double>(ask[k]);
        }
        avg.spread += dt * static_cast<double>(*m.book().best_ask() - *m.book().best_bid());
      });
    } catch (const EmptySide&) {
      ++avg.restarts;
      continue;
    }
    for (std::size_t k = 0; k < depth; ++k) {
      avg.bid[k] /= opts.horizon;
      avg.ask[k] /= opts.horizon;
    }
    avg.spread /= opts.horizon;
    return avg;
  }
  throw EmptySide("shape estimation: sample " + std::to_string(index) + " exhausted its restarts");
}

} // namespace

StationaryShape estimate_stationary_shape(const MarketConfig& cfg, const ShapeEstimationOptions& opts) {
  if (cfg.strategic) {
    throw std::invalid_argument("a market with a strategic trader has no equilibrium shape");
  }
  if (opts.samples < 1 || !(opts.horizon > 0.0) || opts.burn_in < 0.0) {
    throw std::invalid_argument("shape estimation needs samples >= 1, horizon > 0, burn_in >= 0");
  }
  cfg.validate();
  const auto n = static_cast<std::size_t>(opts.samples);
  std::vector<SampleAverage> runs(n);
  for_each_index(n, opts.execution, [&](std::size_t i) { runs[i] = run_sample(cfg, opts, i); });

  const auto depth = static_cast<std::size_t>(cfg.depth);
  StationaryShape shape;
  shape.depth = cfg.depth;
  shape.samples = opts.samples;
  shape.v_bid.assign(depth, 0.0);
  shape.v_ask.assign(depth, 0.0);
  shape.stderr_levels.assign(2 * depth, 0.0);
  shape.spread = 0.0;
  for (const SampleAverage& r : runs) {
    for (std::size_t k = 0; k < depth; ++k) {
      shape.v_bid[k] += r.bid[k] / static_cast<double>(n);
      shape.v_ask[k] += r.ask[k] / static_cast<double>(n);
    }
    shape.spread += r.spread / static_cast<double>(n);
    shape.restarts += r.restarts;
  }
  if (n > 1) {
    const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
    double spread_ss = 0.0;
    for (const SampleAverage& r : runs) {
      for (std::size_t k = 0; k < depth; ++k) {
        shape.stderr_levels[k] += std::pow(r.bid[k] - shape.v_bid[k], 2);
        shape.stderr_levels[depth + k] += std::pow(r.ask[k] - shape.v_ask[k], 2);
      }
      spread_ss += std::pow(r.spread - shape.spread, 2);
    }
    for (double& s : shape.stderr_levels) s = std::sqrt(s / denom);
    shape.spread_stderr = std::sqrt(spread_ss / denom);
  }
  return shape;
}

} // namespace lobexec
