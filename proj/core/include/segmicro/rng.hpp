#pragma once

#include <cstdint>
#include <random>

namespace segmicro {

// splitmix64 step; used to derive independent seed streams from one base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic random stream. mt19937_64 is fully specified by the standard,
// and all derived draws below avoid std::*_distribution (whose output is
// implementation-defined), so identical seeds give identical sequences on
// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double real01() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

  bool bernoulli(double p) { return real01() < p; }

  // Uniform integer in [0, n); n must be > 0. Multiply-shift reduction keeps
  // the mapping deterministic and bias negligible for any realistic n.
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace segmicro
