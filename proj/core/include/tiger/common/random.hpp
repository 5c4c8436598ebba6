#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace tiger {

/// Deterministic random source. All draws are derived from the raw 64-bit
/// engine output with portable arithmetic, so a seed reproduces the same
/// stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::uint64_t index(std::uint64_t n);

  /// Standard normal (Box-Muller).
  double normal();

  /// Independent child stream; the parent stream is not advanced.
  [[nodiscard]] Rng fork(std::uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;

};

/// splitmix64 finaliser, used to derive well-separated sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tiger
