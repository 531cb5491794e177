#include "lobexec/cli/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

namespace lobexec {

namespace {

using json = nlohmann::json;
using Handler = std::function<void(const json&)>;

/// Dispatches each key of `obj` to its handler; rejects unknown keys.
void read_object(const json& obj, const std::string& where, const std::map<std::string, Handler>& handlers) {
  if (!obj.is_object()) throw ConfigError((where.empty() ? "config" : where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const auto h = handlers.find(it.key());
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (h == handlers.end()) throw ConfigError("unknown key " + key);
    try {
      h->second(*it);
    } catch (const json::exception& e) {
      throw ConfigError(key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
}

template <class T>
Handler set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

json noise_json(const NoiseConfig& n) {
  return {{"lambda_market", n.lambda_market}, {"lambda_limit", n.lambda_limit},   {"lambda_cancel", n.lambda_cancel},
          {"sigma_market", n.sigma_market},   {"sigma_limit", n.sigma_limit},     {"sigma_cancel", n.sigma_cancel},
          {"intensity_scale", n.intensity_scale}};
}

void read_noise(const json& j, NoiseConfig& n) {
  read_object(j, "market.noise",
              {{"lambda_market", set(n.lambda_market)},
               {"lambda_limit", set(n.lambda_limit)},
               {"lambda_cancel", set(n.lambda_cancel)},
               {"sigma_market", set(n.sigma_market)},
               {"sigma_limit", set(n.sigma_limit)},
               {"sigma_cancel", set(n.sigma_cancel)},
               {"intensity_scale", set(n.intensity_scale)}});
}

json tactical_json(const TacticalConfig& t) {
  return {{"d_market", t.d_market},         {"d_limit", t.d_limit},         {"d_cancel", t.d_cancel},
          {"damping", t.damping},           {"sigma_market", t.sigma_market}, {"sigma_limit", t.sigma_limit},
          {"sigma_cancel", t.sigma_cancel}, {"intensity_scale", t.intensity_scale}};
}

void read_tactical(const json& j, TacticalConfig& t) {
  read_object(j, "market.tactical",
              {{"d_market", set(t.d_market)},
               {"d_limit", set(t.d_limit)},
               {"d_cancel", set(t.d_cancel)},
               {"damping", set(t.damping)},
               {"sigma_market", set(t.sigma_market)},
               {"sigma_limit", set(t.sigma_limit)},
               {"sigma_cancel", set(t.sigma_cancel)},
               {"intensity_scale", set(t.intensity_scale)}});
}

json strategic_json(const StrategicConfig& s) {
  return {{"market_size", s.market_size},
          {"limit_size", s.limit_size},
          {"dt_market", s.dt_market},
          {"dt_limit", s.dt_limit},
          {"direction", std::string(to_string(s.direction))},
          {"companion_scale", s.companion_scale}};
}

void read_strategic(const json& j, StrategicConfig& s) {
  read_object(j, "market.strategic",
              {{"market_size", set(s.market_size)},
               {"limit_size", set(s.limit_size)},
               {"dt_market", set(s.dt_market)},
               {"dt_limit", set(s.dt_limit)},
               {"direction", [&s](const json& v) { s.direction = parse_direction(v.get<std::string>()); }},
               {"companion_scale", set(s.companion_scale)}});
}

void read_market(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("market must be an object");
  try {
    c.market_kind = parse_market_kind(j.value("kind", std::string(to_string(MarketKind::Noise))));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("market.kind: ") + e.what());
  }
  int depth = 30;
  if (j.contains("depth")) {
    try {
      depth = j.at("depth").get<int>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("market.depth: ") + e.what());
    }
    if (depth < 1) throw ConfigError("market.depth must be >= 1");
  }
  c.market = market_preset(c.market_kind, depth);
  MarketConfig& m = c.market;
  read_object(j, "market",
              {{"kind", [](const json&) {}},
               {"depth", [](const json&) {}},
               {"strategic_start", set(m.strategic_start)},
               {"strategic_end", set(m.strategic_end)},
               {"noise", [&m](const json& v) { read_noise(v, m.noise); }},
               {"tactical",
                [&m](const json& v) {
                  if (!m.tactical) throw ConfigError("market.tactical given for a market without tactical traders");
                  read_tactical(v, *m.tactical);
                }},
               {"strategic", [&m](const json& v) {
                  if (!m.strategic) throw ConfigError("market.strategic given for a market without a strategic trader");
                  read_strategic(v, *m.strategic);
                }}});
}

void read_env(const json& j, EnvSection& e) {
  read_object(j, "env",
              {{"lots", set(e.lots)},
               {"steps", set(e.steps)},
               {"dt", set(e.dt)},
               {"simplex_dim", set(e.simplex_dim)},
               {"initial_bid", set(e.initial_bid)},
               {"initial_ask", set(e.initial_ask)},
               {"queue_normalizer", set(e.queue_normalizer)},
               {"price_normalizer", set(e.price_normalizer)},
               {"max_reset_attempts", set(e.max_reset_attempts)}});
}

json env_json(const EnvSection& e) {
  return {{"lots", e.lots},
          {"steps", e.steps},
          {"dt", e.dt},
          {"simplex_dim", e.simplex_dim},
          {"initial_bid", e.initial_bid},
          {"initial_ask", e.initial_ask},
          {"queue_normalizer", e.queue_normalizer},
          {"price_normalizer", e.price_normalizer},
          {"max_reset_attempts", e.max_reset_attempts}};
}

void read_eval(const json& j, EvalSection& e) {
  read_object(j, "eval",
              {{"episodes", set(e.episodes)},
               {"mode", [&e](const json& v) { e.mode = parse_eval_mode(v.get<std::string>()); }},
               {"execution", [&e](const json& v) { e.execution = parse_execution(v.get<std::string>()); }}});
}

void read_shape(const json& j, ShapeEstimationOptions& s) {
  read_object(j, "shape",
              {{"burn_in", set(s.burn_in)},
               {"horizon", set(s.horizon)},
               {"samples", set(s.samples)},
               {"max_restarts", set(s.max_restarts)},
               {"execution", [&s](const json& v) { s.execution = parse_execution(v.get<std::string>()); }}});
}

void read_paths(const json& j, PathsSection& p) {
  read_object(j, "paths",
              {{"shape_file", set(p.shape_file)},
               {"checkpoint_dir", set(p.checkpoint_dir)},
               {"output_dir", set(p.output_dir)}});
}

void validate(const ExperimentConfig& c) {
  try {
    c.market.validate();
    EnvConfig probe = c.env_config(StationaryShape{});
    probe.shape.depth = c.market.depth;
    probe.shape.v_bid.assign(static_cast<std::size_t>(c.market.depth), 1.0);
    probe.shape.v_ask = probe.shape.v_bid;
    probe.validate();
    c.train.validate(c.env.steps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (c.shape.samples < 1 || !(c.shape.horizon > 0.0) || c.shape.burn_in < 0.0 || c.shape.max_restarts < 0) {
    throw ConfigError("shape: samples >= 1, horizon > 0, burn_in >= 0, max_restarts >= 0 required");
  }
}

} // namespace

std::uint64_t ExperimentConfig::train_seed() const { return derive_seed(seed, "train"); }
std::uint64_t ExperimentConfig::eval_seed() const { return derive_seed(seed, "evaluation"); }
std::uint64_t ExperimentConfig::shape_seed() const { return derive_seed(seed, "shape"); }

EnvConfig ExperimentConfig::env_config(const StationaryShape& s) const {
  EnvConfig e;
  e.lots = env.lots;
  e.steps = env.steps;
  e.dt = env.dt;
  e.simplex_dim = env.simplex_dim;
  e.market = market;
  e.shape = s;
  e.initial_bid = env.initial_bid;
  e.initial_ask = env.initial_ask;
  e.queue_normalizer = env.queue_normalizer;
  e.price_normalizer = env.price_normalizer;
  e.max_reset_attempts = env.max_reset_attempts;
  return e;
}

ShapeEstimationOptions ExperimentConfig::shape_options() const {
  ShapeEstimationOptions o = shape;
  o.seed = shape_seed();
  return o;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  if (j.contains("schema_version")) {
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != ExperimentConfig::kSchemaVersion) {
      throw ConfigError("unsupported schema_version (expected " + std::to_string(ExperimentConfig::kSchemaVersion) + ")");
    }
  }
  read_market(j.contains("market") ? j.at("market") : json::object(), c);
  read_object(j, "",
              {{"schema_version", [](const json&) {}},
               {"market", [](const json&) {}},
               {"seed", set(c.seed)},
               {"env", [&c](const json& v) { read_env(v, c.env); }},
               {"train",
                [&c](const json& v) {
                  if (!v.is_object()) throw ConfigError("train must be an object");
                  if (v.contains("seed")) throw ConfigError("train.seed is derived from the master seed; set \"seed\"");
                  from_json(v, c.train);
                }},
               {"eval", [&c](const json& v) { read_eval(v, c.eval); }},
               {"shape", [&c](const json& v) { read_shape(v, c.shape); }},
               {"paths", [&c](const json& v) { read_paths(v, c.paths); }}});
  set_master_seed(c, c.seed);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
  json market{{"kind", std::string(to_string(c.market_kind))},
              {"depth", c.market.depth},
              {"strategic_start", c.market.strategic_start},
              {"strategic_end", c.market.strategic_end},
              {"noise", noise_json(c.market.noise)}};
  if (c.market.tactical) market["tactical"] = tactical_json(*c.market.tactical);
  if (c.market.strategic) market["strategic"] = strategic_json(*c.market.strategic);
  json train = c.train;
  train.erase("seed");
  return json{{"schema_version", ExperimentConfig::kSchemaVersion},
              {"seed", c.seed},
              {"market", market},
              {"env", env_json(c.env)},
              {"train", train},
              {"eval",
               {{"episodes", c.eval.episodes},
                {"mode", std::string(to_string(c.eval.mode))},
                {"execution", std::string(to_string(c.eval.execution))}}},
              {"shape",
               {{"burn_in", c.shape.burn_in},
                {"horizon", c.shape.horizon},
                {"samples", c.shape.samples},
                {"max_restarts", c.shape.max_restarts},
                {"execution", std::string(to_string(c.shape.execution))}}},
              {"paths",
               {{"shape_file", c.paths.shape_file},
                {"checkpoint_dir", c.paths.checkpoint_dir},
                {"output_dir", c.paths.output_dir}}}};
}

void set_master_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.train.seed = c.train_seed();
  c.shape.seed = c.shape_seed();
}

} // namespace lobexec
