#pragma once

#include <cstdint>
#include <random>

namespace sharpnorm {

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed plus a tag so that consumers (init, shuffling, probes, ...) cannot
// collide even if they share the user-facing seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

// Deterministic RNG with portable output. mt19937_64 is fully specified by
// the standard; the distribution transforms below are hand-rolled because
// std::uniform_real_distribution / std::normal_distribution are
// implementation-defined and would break bit-reproducibility across stdlibs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive, via rejection (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via polar Box-Muller with a cached spare.
  double normal();

  // +1 or -1 with equal probability.
  double rademacher() { return (engine_() & 1u) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sharpnorm
