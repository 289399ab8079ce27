#pragma once
#include <cstdint>

namespace auctopt {

/** Counter-based generator: every draw is addressed by (seed, stream, counter)
    and computed statelessly, so Monte Carlo results are bit-reproducible no
    matter how the sample range is partitioned across threads. */
struct CounterRng {
  std::uint64_t seed = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t raw(std::uint64_t stream, std::uint64_t counter) const {
    std::uint64_t h = mix(seed ^ 0x6a09e667f3bcc908ull);
    h = mix(h + 0x9e3779b97f4a7c15ull * (stream + 1));
    h = mix(h + 0x9e3779b97f4a7c15ull * (counter + 1));
    return h;
  }

  /// uniform double in [0,1), 53 mantissa bits
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(raw(stream, counter) >> 11) * 0x1.0p-53;
  }
};

}  // namespace auctopt
