#pragma once

#include <cstdint>
#include <random>

namespace dimal {

/// Deterministic uniform source. The raw engine is the standardized
/// mt19937_64; all distribution mapping is done by hand so that generated
/// streams never depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0.
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(engine_()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 step; used to derive independent sub-seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dimal
