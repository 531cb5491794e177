#include "lobexec/cli/commands.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lobexec/io.hpp"

#ifndef LOBEXEC_VERSION
#define LOBEXEC_VERSION "0.0.0"
#endif

namespace lobexec {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

fs::path output_dir(const ExperimentConfig& c) {
  const fs::path dir(c.paths.output_dir);
  fs::create_directories(dir);
  return dir;
}

StationaryShape shape_for(const MarketConfig& market, const ExperimentConfig& c) {
  return estimate_stationary_shape(equilibrium_market(market), c.shape_options());
}

int observation_dim(const ExperimentConfig& c) {
  return ObservationLayout::make(c.env.lots, c.env.simplex_dim).size;
}

json summary_json(const std::string& target, const ExperimentConfig& c, EvalMode mode, const EvalResult& r) {
  return {{"target", target},
          {"market", std::string(to_string(c.market_kind))},
          {"lots", c.env.lots},
          {"episodes", r.returns.size()},
          {"mode", std::string(to_string(mode))},
          {"mean", r.mean},
          {"std", r.stddev},
          {"aborts", r.aborts},
          {"incomplete_liquidations", r.incomplete_liquidations}};
}

} // namespace

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig c = opts.config ? load_config(*opts.config) : parse_config(json::object());
  if (opts.seed) set_master_seed(c, *opts.seed);
  if (opts.out) c.paths.output_dir = opts.out->string();
  return c;
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"command", m.command},   {"config_hash", m.config_hash}, {"master_seed", m.master_seed},
           {"seeds", m.seeds},       {"version", m.version},         {"started_at", m.started_at},
           {"finished_at", m.finished_at}, {"aborts", m.aborts},     {"status", m.status}};
  if (!m.error.empty()) j["error"] = m.error;
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string code_version() { return LOBEXEC_VERSION; }

StationaryShape experiment_shape(const ExperimentConfig& c) {
  if (!c.paths.shape_file.empty()) {
    if (!fs::exists(c.paths.shape_file)) throw ConfigError("shape file " + c.paths.shape_file + " does not exist");
    StationaryShape s = load_shape(c.paths.shape_file);
    if (s.depth != c.market.depth) throw ConfigError("shape file depth does not match market.depth");
    return s;
  }
  return shape_for(c.market, c);
}

int cmd_estimate_shape(const ExperimentConfig& c, RunManifest& manifest) {
  if (c.market.strategic) {
    throw ConfigError("the strategic market does not have an equilibrium state; estimate the noise_tactical shape");
  }
  manifest.seeds["shape"] = c.shape_seed();
  const StationaryShape shape = estimate_stationary_shape(c.market, c.shape_options());
  manifest.aborts["shape_restarts"] = static_cast<std::uint64_t>(shape.restarts);
  save_shape(output_dir(c) / "shape.json", shape);
  std::cout << "spread " << format_double(shape.spread) << " (+/- " << format_double(shape.spread_stderr) << ")\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& c, const TrainOptions& opts, RunManifest& manifest) {
  manifest.seeds["train"] = c.train_seed();
  TrainerState state;
  if (opts.resume) {
    if (!fs::exists(*opts.resume)) throw ConfigError("checkpoint " + opts.resume->string() + " does not exist");
    state = load_checkpoint(*opts.resume);
    if (state.policy->simplex_dim() != c.env.simplex_dim ||
        state.policy->network().input_dim() != observation_dim(c)) {
      throw ConfigError("checkpoint does not match env.lots/env.simplex_dim");
    }
  } else {
    state = initial_trainer_state(c.train, observation_dim(c), c.env.simplex_dim);
  }
  if (!opts.resume) manifest.seeds["shape"] = c.shape_seed();
  const EnvConfig env_cfg = c.env_config(experiment_shape(c));

  const fs::path dir = output_dir(c);
  const fs::path ckpt_dir = dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  TrainHooks hooks;
  hooks.on_iteration = [&](const CurvePoint& p) {
    if (!opts.quiet) {
      std::cerr << "iteration " << p.iteration << " mean_return " << format_double(p.mean_return) << " sigma "
                << format_double(p.sigma) << '\n';
    }
  };
  hooks.on_checkpoint = [&](const TrainerState& s) {
    std::ostringstream name;
    name << "iter_" << std::setw(4) << std::setfill('0') << s.iteration << ".json";
    save_checkpoint(ckpt_dir / name.str(), s);
    save_checkpoint(dir / "checkpoint.json", s);
  };
  train(state, env_cfg, hooks);

  std::uint64_t aborts = 0;
  for (const CurvePoint& p : state.curve) aborts += p.aborts;
  manifest.aborts["training_episodes"] = aborts;
  std::ofstream curve = open_output(dir / "curve.csv");
  write_curve_csv(curve, state.curve);
  return kExitOk;
}

int cmd_evaluate(const ExperimentConfig& c, const EvaluateOptions& opts, RunManifest& manifest) {
  if (opts.benchmark.has_value() == opts.checkpoint.has_value()) {
    throw ConfigError("evaluate needs exactly one of --benchmark or --checkpoint");
  }
  const EvalMode mode = opts.mode.value_or(c.eval.mode);
  std::unique_ptr<Policy> policy;
  std::string target;
  Controller controller;
  if (opts.checkpoint) {
    if (!fs::exists(*opts.checkpoint)) throw ConfigError("checkpoint " + opts.checkpoint->string() + " does not exist");
    TrainerState s = load_checkpoint(*opts.checkpoint);
    if (s.policy->simplex_dim() != c.env.simplex_dim || s.policy->network().input_dim() != observation_dim(c)) {
      throw ConfigError("checkpoint does not match env.lots/env.simplex_dim");
    }
    policy = std::move(s.policy);
    target = std::string(to_string(policy->kind()));
    controller = policy_controller(*policy, mode);
  } else {
    target = std::string(to_string(*opts.benchmark));
    controller = heuristic_controller(*opts.benchmark);
  }
  manifest.seeds["evaluation"] = c.eval_seed();
  manifest.seeds["shape"] = c.shape_seed();
  const EnvConfig env_cfg = c.env_config(experiment_shape(c));
  const EvalResult r = evaluate(controller, env_cfg, c.eval.episodes, c.eval_seed(), c.eval.execution);
  manifest.aborts["evaluation_episodes"] = r.aborts;

  const fs::path dir = output_dir(c);
  {
    std::ofstream out = open_output(dir / "evaluation.csv");
    write_evaluation_csv(out, r);
  }
  {
    std::ofstream out = open_output(dir / "histogram.csv");
    write_histogram_csv(out, r.histogram);
  }
  write_json(dir / "summary.json", summary_json(target, c, mode, r));
  if (opts.trace) {
    ExecutionEnv env(env_cfg, derive_seed(c.eval_seed(), "evaluation-env", 0));
    env.set_trace(true);
    const std::uint64_t s = evaluation_seed(c.eval_seed(), 0, 0);
    Rng rng(derive_seed(s, "action"));
    Observation obs = env.reset(s);
    while (!env.done()) obs = controller(env, obs, rng).observation;
    std::ofstream out = open_output(dir / "trace.csv");
    env.write_trace_csv(out);
  }
  std::cout << target << " mean " << format_double(r.mean) << " std " << format_double(r.stddev) << '\n';
  return kExitOk;
}

namespace {

struct Cell {
  enum class State { Value, Missing, Error } state = State::Missing;
  double mean = 0.0;
  double stddev = 0.0;
  std::string error;
};

constexpr std::array<MarketKind, 3> kTableMarkets{MarketKind::Noise, MarketKind::NoiseTactical,
                                                  MarketKind::NoiseTacticalStrategic};
constexpr std::array<int, 2> kTableLots{20, 60};
constexpr const char* kMissing = "—";

std::string cell_text(const Cell& cell, bool mean, bool pretty) {
  if (cell.state == Cell::State::Missing) return kMissing;
  if (cell.state == Cell::State::Error) return "error";
  const double v = mean ? cell.mean : cell.stddev;
  if (!pretty) return format_double(v);
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string market_label(MarketKind k) {
  switch (k) {
    case MarketKind::Noise: return "Noise";
    case MarketKind::NoiseTactical: return "Noise & Tactical";
    case MarketKind::NoiseTacticalStrategic: return "Noise & Tactical & Strategic";
  }
  return "";
}

} // namespace

int cmd_reproduce_table1(const ExperimentConfig& c, const Table1Options& opts, RunManifest& manifest) {
  manifest.seeds["evaluation"] = c.eval_seed();
  manifest.seeds["shape"] = c.shape_seed();
  const fs::path dir = output_dir(c);
  // Column order: SL, TWAP, DR, LN.
  std::array<std::array<Cell, 4>, 6> table{};
  std::map<std::string, StationaryShape> shapes;
  std::map<std::string, std::string> shape_errors;
  bool any_error = false;
  std::uint64_t aborts = 0;

  for (std::size_t m = 0; m < kTableMarkets.size(); ++m) {
    ExperimentConfig row = c;
    row.market_kind = kTableMarkets[m];
    if (row.market_kind != c.market_kind) row.market = market_preset(row.market_kind, c.market.depth);
    const std::string eq_key(to_string(row.market.tactical ? MarketKind::NoiseTactical : MarketKind::Noise));
    if (!shapes.count(eq_key) && !shape_errors.count(eq_key)) {
      try {
        shapes[eq_key] = shape_for(row.market, row);
        save_shape(dir / ("shape_" + eq_key + ".json"), shapes[eq_key]);
      } catch (const std::exception& e) {
        shape_errors[eq_key] = e.what();
      }
    }
    for (std::size_t l = 0; l < kTableLots.size(); ++l) {
      row.env.lots = kTableLots[l];
      auto& cells = table[m * kTableLots.size() + l];
      const std::string prefix = std::string(to_string(row.market_kind)) + "_" + std::to_string(row.env.lots);
      const auto run = [&](Cell& cell, const Controller& controller) {
        if (shape_errors.count(eq_key)) {
          cell.state = Cell::State::Error;
          cell.error = "shape: " + shape_errors[eq_key];
          return;
        }
        try {
          const EvalResult r =
              evaluate(controller, row.env_config(shapes.at(eq_key)), row.eval.episodes, row.eval_seed(), row.eval.execution);
          cell.state = Cell::State::Value;
          cell.mean = r.mean;
          cell.stddev = r.stddev;
          aborts += r.aborts;
        } catch (const std::exception& e) {
          cell.state = Cell::State::Error;
          cell.error = e.what();
        }
      };
      run(cells[0], heuristic_controller(HeuristicKind::SubmitAndLeave));
      run(cells[1], heuristic_controller(HeuristicKind::Twap));
      if (!opts.benchmarks_only && !c.paths.checkpoint_dir.empty()) {
        const std::array<std::string, 2> tags{"dr", "ln"};
        for (std::size_t p = 0; p < tags.size(); ++p) {
          const fs::path ckpt = fs::path(c.paths.checkpoint_dir) / (prefix + "_" + tags[p] + ".json");
          if (!fs::exists(ckpt)) continue;
          Cell& cell = cells[2 + p];
          try {
            TrainerState s = load_checkpoint(ckpt);
            if (s.policy->network().input_dim() != observation_dim(row) ||
                s.policy->simplex_dim() != row.env.simplex_dim) {
              throw std::runtime_error("checkpoint does not match the row's environment");
            }
            run(cell, policy_controller(*s.policy, row.eval.mode));
          } catch (const std::exception& e) {
            cell.state = Cell::State::Error;
            cell.error = e.what();
          }
        }
      }
      for (const Cell& cell : cells) {
        if (cell.state == Cell::State::Error) {
          any_error = true;
          std::cerr << prefix << ": " << cell.error << '\n';
        }
      }
    }
  }
  manifest.aborts["evaluation_episodes"] = aborts;

  {
    std::ofstream csv = open_output(dir / "table1.csv");
    csv << "market,lots,E[SL],sd[SL],E[TWAP],sd[TWAP],E[DR],sd[DR],E[LN],sd[LN]\n";
    for (std::size_t r = 0; r < table.size(); ++r) {
      csv << to_string(kTableMarkets[r / 2]) << ',' << kTableLots[r % 2];
      for (const Cell& cell : table[r]) csv << ',' << cell_text(cell, true, false) << ',' << cell_text(cell, false, false);
      csv << '\n';
    }
  }
  std::ostringstream text;
  text << std::left << std::setw(30) << "Market" << std::setw(6) << "Lots";
  for (const char* h : {"E[SL]", "sd[SL]", "E[TWAP]", "sd[TWAP]", "E[DR]", "sd[DR]", "E[LN]", "sd[LN]"}) {
    text << std::right << std::setw(10) << h;
  }
  text << '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    text << std::left << std::setw(30) << (r % 2 == 0 ? market_label(kTableMarkets[r / 2]) : "") << std::setw(6)
         << kTableLots[r % 2];
    for (const Cell& cell : table[r]) {
      for (bool mean : {true, false}) {
        const std::string s = cell_text(cell, mean, true);
        const int pad = cell.state == Cell::State::Missing ? 12 : 10;
        text << std::right << std::setw(pad) << s;
      }
    }
    text << '\n';
  }
  {
    std::ofstream out = open_output(dir / "table1.txt");
    out << text.str();
  }
  std::cout << text.str();
  return any_error ? kExitRuntime : kExitOk;
}

int run_command(const std::string& command, const CommonOptions& common,
                const std::function<int(const ExperimentConfig&, RunManifest&)>& body) {
  RunManifest manifest;
  manifest.command = command;
  manifest.version = code_version();
  manifest.started_at = utc_now();
  std::optional<ExperimentConfig> cfg;
  int code = kExitOk;
  try {
    cfg = resolve_config(common);
    manifest.config_hash = config_hash(*cfg);
    manifest.master_seed = cfg->seed;
    code = body(*cfg, manifest);
    if (code != kExitOk) manifest.status = "partial";
  } catch (const ConfigError& e) {
    manifest.status = "config_error";
    manifest.error = e.what();
    std::cerr << "config error: " << e.what() << '\n';
    code = kExitConfig;
  } catch (const std::exception& e) {
    manifest.status = "runtime_error";
    manifest.error = e.what();
    std::cerr << "error: " << e.what() << '\n';
    code = kExitRuntime;
  }
  manifest.finished_at = utc_now();
  if (cfg) {
    try {
      write_json(output_dir(*cfg) / ("manifest-" + command + ".json"), manifest);
      write_json(output_dir(*cfg) / ("config-" + command + ".json"), config_to_json(*cfg));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      if (code == kExitOk) code = kExitRuntime;
    }
  }
  return code;
}

} // namespace lobexec
