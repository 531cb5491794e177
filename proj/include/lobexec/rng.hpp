#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lobexec {

/// Seeded mt19937_64 stream with pinned sampling algorithms; no
/// std::*_distribution is used.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  void reseed(std::uint64_t seed) {
    engine_.seed(seed);
    has_spare_ = false;
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Standard normal via the Marsaglia polar method; the second variate of
  /// each accepted pair is cached.
  double normal();

  /// Exponential waiting time by inverse transform.
  double exponential(double rate);

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze rejection, boosted for shape < 1.
  double gamma(double shape);

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from (master, purpose tag, index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

} // namespace lobexec
