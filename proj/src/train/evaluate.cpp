#include "lobexec/train/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "lobexec/io.hpp"

namespace lobexec {

std::string_view to_string(EvalMode m) noexcept { return m == EvalMode::Stochastic ? "stochastic" : "mean"; }

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "stochastic") return EvalMode::Stochastic;
  if (name == "mean") return EvalMode::Mean;
  throw std::invalid_argument("unknown evaluation mode '" + std::string(name) + "'");
}

Histogram Histogram::make(double low, double high, double width) {
  if (!(width > 0.0) || !(high > low)) throw std::invalid_argument("histogram needs high > low and width > 0");
  Histogram h;
  h.low = low;
  h.high = high;
  h.width = width;
  h.counts.assign(static_cast<std::size_t>(std::ceil((high - low) / width - 1e-9)), 0);
  return h;
}

void Histogram::add(double value) {
  if (counts.empty()) throw std::logic_error("histogram has no bins");
  const double pos = std::floor((value - low) / width);
  std::size_t idx = 0;
  if (pos >= static_cast<double>(counts.size())) {
    idx = counts.size() - 1;
  } else if (pos > 0.0) {
    idx = static_cast<std::size_t>(pos);
  }
  ++counts[idx];
}

std::uint64_t Histogram::total() const noexcept {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts) t += c;
  return t;
}

Controller policy_controller(const Policy& policy, EvalMode mode) {
  return [&policy, mode](ExecutionEnv& env, const Observation& obs, Rng& rng) {
    if (mode == EvalMode::Mean) return env.step(policy.mean_action(obs));
    return env.step(policy.sample(obs, rng).action);
  };
}

Controller heuristic_controller(HeuristicKind kind) {
  return [kind](ExecutionEnv& env, const Observation&, Rng&) {
    return env.step_passive(heuristic_lots(kind, env.step_index(), env.config().lots, env.config().steps));
  };
}

std::uint64_t evaluation_seed(std::uint64_t master, std::size_t episode, int attempt) {
  return derive_seed(derive_seed(master, "evaluation", episode), "attempt", static_cast<std::uint64_t>(attempt));
}

namespace {

constexpr int kMaxEpisodeAttempts = 64;
constexpr std::size_t kChunk = 16;

struct EpisodeOutcome {
  double total = 0.0;
  Lots forced = 0;
  bool incomplete = false;
};

} // namespace

EvalResult evaluate(const Controller& controller, const EnvConfig& env_cfg, std::size_t episodes, std::uint64_t seed,
                    Execution execution) {
  env_cfg.validate();
  if (episodes == 0) throw std::invalid_argument("evaluate needs at least one episode");
  std::vector<EpisodeOutcome> outcomes(episodes);
  const std::size_t chunks = (episodes + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> chunk_aborts(chunks, 0);

  for_each_index(chunks, execution, [&](std::size_t c) {
    ExecutionEnv env(env_cfg, derive_seed(seed, "evaluation-env", c));
    const std::size_t end = std::min(episodes, (c + 1) * kChunk);
    for (std::size_t e = c * kChunk; e < end; ++e) {
      for (int attempt = 0;; ++attempt) {
        if (attempt >= kMaxEpisodeAttempts) throw EpisodeAborted("evaluate: episode aborted on every attempt");
        try {
          const std::uint64_t s = evaluation_seed(seed, e, attempt);
          Rng rng(derive_seed(s, "action"));
          Observation obs = env.reset(s);
          EpisodeOutcome out;
          while (!env.done()) {
            StepResult r = controller(env, obs, rng);
            out.total += r.reward;
            out.forced += r.info.forced_lots;
            obs = std::move(r.observation);
          }
          out.incomplete = env.liquidation_incomplete();
          outcomes[e] = out;
          break;
        } catch (const EpisodeAborted&) {
          ++chunk_aborts[c];
        }
      }
    }
    chunk_aborts[c] += env.aborts();
  });

  EvalResult r;
  r.histogram = Histogram::make();
  r.returns.reserve(episodes);
  r.lots_forced.reserve(episodes);
  double sum = 0.0;
  for (const EpisodeOutcome& o : outcomes) {
    r.returns.push_back(o.total);
    r.lots_forced.push_back(o.forced);
    r.histogram.add(o.total);
    r.incomplete_liquidations += o.incomplete ? 1 : 0;
    sum += o.total;
  }
  for (std::uint64_t a : chunk_aborts) r.aborts += a;
  r.mean = sum / static_cast<double>(episodes);
  double ss = 0.0;
  for (double v : r.returns) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(episodes));
  return r;
}

void write_evaluation_csv(std::ostream& out, const EvalResult& r) {
  out << "episode,total_reward,lots_forced\n";
  for (std::size_t e = 0; e < r.returns.size(); ++e) {
    out << e << ',' << format_double(r.returns[e]) << ',' << r.lots_forced[e] << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_left,count\n";
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out << format_double(h.bin_left(i)) << ',' << h.counts[i] << '\n';
  }
}

} // namespace lobexec
