#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lobexec/cli/commands.hpp"

namespace {

void add_common(CLI::App* cmd, lobexec::CommonOptions& common, std::string& config, std::string& out) {
  cmd->add_option("--config", config, "Experiment config JSON (defaults: noise market, 20 lots)");
  cmd->add_option("--seed", common.seed, "Master seed");
  cmd->add_option("--out", out, "Output directory");
}

} // namespace

int main(int argc, char** argv) {
  using namespace lobexec;
  CLI::App app{"Limit order book execution: simulation, training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  CommonOptions common;
  std::string config;
  std::string out;

  CLI::App* shape = app.add_subcommand("estimate-shape", "Estimate the stationary book shape");
  add_common(shape, common, config, out);

  TrainOptions train_opts;
  std::string resume;
  CLI::App* train = app.add_subcommand("train", "Train a logistic-normal or Dirichlet policy");
  add_common(train, common, config, out);
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_flag("--quiet", train_opts.quiet, "No per-iteration progress");

  std::string benchmark;
  std::string checkpoint;
  std::string mode;
  EvaluateOptions eval_opts;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a benchmark or a trained policy");
  add_common(evaluate, common, config, out);
  evaluate->add_option("--benchmark", benchmark, "sl or twap")->check(CLI::IsMember({"sl", "twap"}));
  evaluate->add_option("--checkpoint", checkpoint, "Trained checkpoint JSON");
  evaluate->add_option("--mode", mode, "stochastic or mean")->check(CLI::IsMember({"stochastic", "mean"}));
  evaluate->add_flag("--trace", eval_opts.trace, "Write trace.csv for the first episode");

  Table1Options table_opts;
  CLI::App* table = app.add_subcommand("reproduce-table1", "Evaluate every market and position size");
  add_common(table, common, config, out);
  table->add_flag("--benchmarks-only", table_opts.benchmarks_only, "Only the SL and TWAP columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (!config.empty()) common.config = config;
  if (!out.empty()) common.out = out;

  if (shape->parsed()) {
    return run_command("estimate-shape", common, [](const ExperimentConfig& c, RunManifest& m) {
      return cmd_estimate_shape(c, m);
    });
  }
  if (train->parsed()) {
    if (!resume.empty()) train_opts.resume = resume;
    return run_command("train", common, [&](const ExperimentConfig& c, RunManifest& m) {
      return cmd_train(c, train_opts, m);
    });
  }
  if (evaluate->parsed()) {
    return run_command("evaluate", common, [&](const ExperimentConfig& c, RunManifest& m) {
      if (!benchmark.empty()) eval_opts.benchmark = parse_heuristic_kind(benchmark);
      if (!checkpoint.empty()) eval_opts.checkpoint = checkpoint;
      if (!mode.empty()) eval_opts.mode = parse_eval_mode(mode);
      return cmd_evaluate(c, eval_opts, m);
    });
  }
  return run_command("reproduce-table1", common, [&](const ExperimentConfig& c, RunManifest& m) {
    return cmd_reproduce_table1(c, table_opts, m);
  });
}
