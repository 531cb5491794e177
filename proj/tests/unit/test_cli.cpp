#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lobexec/cli/commands.hpp"
#include "lobexec/cli/config.hpp"

using namespace lobexec;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lobexec_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

/// Small shape estimation so command tests run quickly.
json fast_config() {
  return {{"shape", {{"burn_in", 50.0}, {"horizon", 200.0}, {"samples", 2}}}, {"eval", {{"episodes", 64}}}};
}

CommonOptions options(const fs::path& config, const fs::path& out) {
  CommonOptions o;
  o.config = config;
  o.out = out;
  return o;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("empty config gives the default experiment") {
  const ExperimentConfig c = parse_config(json::object());
  CHECK(c.market_kind == MarketKind::Noise);
  CHECK(c.market.depth == 30);
  CHECK(c.env.lots == 20);
  CHECK(c.env.steps == 10);
  CHECK(c.env.dt == 15.0);
  CHECK(c.env.simplex_dim == 6);
  CHECK(c.train.iterations == 400);
  CHECK(c.train.parallel_envs == 128);
  CHECK(c.train.steps_per_env == 100);
  CHECK(c.train.learning_rate == 5e-4);
  CHECK(c.train.hidden_width == 128);
  CHECK(c.eval.episodes == 10000);
  CHECK(c.train.seed == c.train_seed());
  CHECK(c.train_seed() != c.eval_seed());
  CHECK(c.eval_seed() != c.shape_seed());
}

TEST_CASE("config round trip is idempotent") {
  for (const char* kind : {"noise", "noise_tactical", "noise_tactical_strategic"}) {
    json in{{"seed", 9}, {"market", {{"kind", kind}}}, {"env", {{"lots", 60}}}};
    const ExperimentConfig c = parse_config(in);
    const json once = config_to_json(c);
    const json twice = config_to_json(parse_config(once));
    CHECK(once == twice);
    CHECK(config_hash(c) == config_hash(parse_config(once)));
    CHECK(parse_config(once).train.seed == c.train.seed);
  }
  ExperimentConfig a = parse_config(json::object());
  ExperimentConfig b = a;
  set_master_seed(b, 2);
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_WITH_AS(parse_config(json{{"bogus", 1}}), "unknown key bogus", ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"env", {{"lotz", 1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"market", {{"noise", {{"lambda", 1}}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"market", {{"tactical", json::object()}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"market", {{"kind", "nonsense"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"train", {{"seed", 3}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 2}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"env", {{"lots", 0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"env", {{"lots", "twenty"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"train", {{"steps_per_env", 15}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"eval", {{"episodes", 0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("shipped configs parse") {
  const fs::path dir = fs::path(LOBEXEC_SOURCE_DIR) / "configs";
  int count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++count;
  }
  CHECK(count > 0);
}

TEST_CASE("exit codes and manifests") {
  TempDir tmp("exit");
  json strategic = fast_config();
  strategic["market"] = {{"kind", "noise_tactical_strategic"}};
  const int code = run_command("estimate-shape", options(write_config(tmp.path, strategic), tmp.path / "out"),
                               [](const ExperimentConfig& c, RunManifest& m) { return cmd_estimate_shape(c, m); });
  CHECK(code == kExitConfig);
  const json manifest = json::parse(slurp(tmp.path / "out" / "manifest-estimate-shape.json"));
  CHECK(manifest.at("status") == "config_error");

  const fs::path bad = tmp.path / "bad.json";
  std::ofstream(bad) << "{\"bogus\": 1}";
  CHECK(run_command("evaluate", options(bad, tmp.path / "out2"), [](const ExperimentConfig&, RunManifest&) {
          return kExitOk;
        }) == kExitConfig);

  CHECK(run_command("evaluate", options(write_config(tmp.path, fast_config()), tmp.path / "out3"),
                    [](const ExperimentConfig&, RunManifest&) -> int { throw std::runtime_error("boom"); }) ==
        kExitRuntime);

  EvaluateOptions neither;
  CHECK(run_command("evaluate", options(write_config(tmp.path, fast_config()), tmp.path / "out4"),
                    [&](const ExperimentConfig& c, RunManifest& m) { return cmd_evaluate(c, neither, m); }) ==
        kExitConfig);
}

TEST_CASE("estimate-shape output is reproducible") {
  TempDir tmp("shape");
  const fs::path cfg = write_config(tmp.path, fast_config());
  const auto body = [](const ExperimentConfig& c, RunManifest& m) { return cmd_estimate_shape(c, m); };
  REQUIRE(run_command("estimate-shape", options(cfg, tmp.path / "a"), body) == kExitOk);
  REQUIRE(run_command("estimate-shape", options(cfg, tmp.path / "b"), body) == kExitOk);
  const std::string a = slurp(tmp.path / "a" / "shape.json");
  CHECK(!a.empty());
  CHECK(a == slurp(tmp.path / "b" / "shape.json"));
  json ca = json::parse(slurp(tmp.path / "a" / "config-estimate-shape.json"));
  json cb = json::parse(slurp(tmp.path / "b" / "config-estimate-shape.json"));
  CHECK(ca["paths"]["output_dir"] != cb["paths"]["output_dir"]);
  ca["paths"].erase("output_dir");
  cb["paths"].erase("output_dir");
  CHECK(ca == cb);
  const json manifest = json::parse(slurp(tmp.path / "a" / "manifest-estimate-shape.json"));
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("master_seed") == 1);
  CHECK(manifest.at("seeds").contains("shape"));

  CommonOptions other = options(cfg, tmp.path / "c");
  other.seed = 2;
  REQUIRE(run_command("estimate-shape", other, body) == kExitOk);
  CHECK(slurp(tmp.path / "c" / "shape.json") != a);
}

TEST_CASE("evaluate writes consistent outputs") {
  TempDir tmp("evaluate");
  const fs::path cfg = write_config(tmp.path, fast_config());
  EvaluateOptions opts;
  opts.benchmark = HeuristicKind::Twap;
  opts.trace = true;
  REQUIRE(run_command("evaluate", options(cfg, tmp.path / "out"),
                      [&](const ExperimentConfig& c, RunManifest& m) { return cmd_evaluate(c, opts, m); }) == kExitOk);
  const fs::path out = tmp.path / "out";
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("episodes") == 64);
  CHECK(summary.at("target") == "twap");

  std::istringstream hist(slurp(out / "histogram.csv"));
  std::string line;
  std::getline(hist, line);
  CHECK(line == "bin_left,count");
  std::uint64_t total = 0;
  while (std::getline(hist, line)) total += std::stoull(line.substr(line.find(',') + 1));
  CHECK(total == 64);

  std::istringstream rows(slurp(out / "evaluation.csv"));
  int lines = 0;
  while (std::getline(rows, line)) ++lines;
  CHECK(lines == 65);
  CHECK(slurp(out / "trace.csv").rfind("step,action,lots_sold,reward,inventory\n", 0) == 0);
}

TEST_CASE("reproduce-table1 with benchmarks only") {
  TempDir tmp("table1");
  json j = fast_config();
  j["eval"]["episodes"] = 16;
  j["paths"] = {{"checkpoint_dir", (tmp.path / "ckpts").string()}};
  fs::create_directories(tmp.path / "ckpts");
  Table1Options opts;
  opts.benchmarks_only = true;
  const int code = run_command("reproduce-table1", options(write_config(tmp.path, j), tmp.path / "out"),
                               [&](const ExperimentConfig& c, RunManifest& m) { return cmd_reproduce_table1(c, opts, m); });
  CHECK((code == kExitOk || code == kExitRuntime));
  std::istringstream csv(slurp(tmp.path / "out" / "table1.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "market,lots,E[SL],sd[SL],E[TWAP],sd[TWAP],E[DR],sd[DR],E[LN],sd[LN]");
  std::getline(csv, line);
  CHECK(line.rfind("noise,20,", 0) == 0);
  CHECK(line.find(",—,—,—,—") != std::string::npos);
  CHECK(line.find("error") == std::string::npos);
  int rows = 1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
  CHECK(fs::exists(tmp.path / "out" / "table1.txt"));
  CHECK(fs::exists(tmp.path / "out" / "shape_noise.json"));
}

TEST_CASE("smoke training config completes and resumes") {
  TempDir tmp("train");
  const fs::path cfg = fs::path(LOBEXEC_SOURCE_DIR) / "configs" / "smoke_train.json";
  TrainOptions opts;
  opts.quiet = true;
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(run_command("train", options(cfg, tmp.path / "out"),
                      [&](const ExperimentConfig& c, RunManifest& m) { return cmd_train(c, opts, m); }) == kExitOk);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(60));
  const fs::path out = tmp.path / "out";
  CHECK(fs::exists(out / "checkpoints" / "iter_0001.json"));
  CHECK(fs::exists(out / "checkpoints" / "iter_0002.json"));
  std::istringstream curve(slurp(out / "curve.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(curve, line)) ++lines;
  CHECK(lines == 3);

  TrainOptions resume;
  resume.quiet = true;
  resume.resume = out / "checkpoints" / "iter_0001.json";
  REQUIRE(run_command("train", options(cfg, tmp.path / "resumed"),
                      [&](const ExperimentConfig& c, RunManifest& m) { return cmd_train(c, resume, m); }) == kExitOk);
  const json full = json::parse(slurp(out / "checkpoint.json"));
  const json resumed = json::parse(slurp(tmp.path / "resumed" / "checkpoint.json"));
  CHECK(full.at("policy") == resumed.at("policy"));

  EvaluateOptions eval;
  eval.checkpoint = out / "checkpoint.json";
  CHECK(run_command("evaluate", options(cfg, tmp.path / "eval"),
                    [&](const ExperimentConfig& c, RunManifest& m) { return cmd_evaluate(c, eval, m); }) == kExitOk);
  CHECK(json::parse(slurp(tmp.path / "eval" / "summary.json")).at("target") == "logistic_normal");
}

}
