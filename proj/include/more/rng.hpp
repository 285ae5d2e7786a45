#pragma once

#include <cstdint>
#include <random>

namespace more {

/// Portable random source. The bit stream is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; every conversion to a distribution
/// is implemented here rather than with <random> distributions, whose
/// algorithms differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform on (0, 1]; safe as a log() argument.
  double uniform_open_zero() { return 1.0 - uniform(); }

  /// Standard normal via the Box-Muller transform (one draw per call,
  /// the sine branch is cached).
  double normal();

  /// Exponential(1).
  double exponential();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Deterministic child seed for (parent, a, b).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0);

}  // namespace more
