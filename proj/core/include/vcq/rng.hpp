#pragma once

#include <cstdint>

namespace vcq {

/// Counter-based pseudorandom generator. Every draw is a pure function of
/// (seed, stream, counter), so independent streams never perturb each
/// other and a draw can be re-indexed without replaying the sequence.
class CounterRng {
 public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}

  uint64_t bits(uint64_t stream, uint64_t counter) const {
    uint64_t z = mix(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return mix(z + counter * 0xD1B54A32D192ED03ULL);
  }

  /// Uniform double in [0, 1).
  double uniform(uint64_t stream, uint64_t counter) const {
    return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
  }

  uint64_t seed() const { return seed_; }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
};

}  // namespace vcq
