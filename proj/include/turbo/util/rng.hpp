#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace turbo {

/// Deterministic PRNG used everywhere randomness appears.
///
/// The state is xoshiro256** seeded through SplitMix64, so a 64-bit seed fully
/// determines the stream on every platform. Gaussian draws use the basic
/// Box-Muller transform and consume two uniforms per pair; the second value of
/// each pair is cached. Nothing here depends on <random> distributions, whose
/// output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Seed derived from a base seed and a list of stream identifiers
  /// (e.g. {data_seed, step, stream}). Used to make per-step draws
  /// independent of how many steps ran before.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform on (0, 1]; safe to take the log of.
  double uniform_open0();
  double normal();
  double exponential();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace turbo
