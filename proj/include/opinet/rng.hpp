#pragma once

#include <cstdint>
#include <limits>

namespace opinet {

// Counter-based generator: the i-th output is a bijective mix of (key, i), so a
// stream can be split into independent, reproducible substreams by deriving a
// new key. Models the UniformRandomBitGenerator concept for <random>.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x243f6a8885a308d3ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Independent substream; same (seed, stream) always yields the same sequence.
  CounterRng split(std::uint64_t stream) const {
    CounterRng child;
    child.key_ = mix(key_ ^ mix(stream + 0x632be59bd9b4e019ULL));
    return child;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n > 0. Rejection avoids modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do { r = (*this)(); } while (r >= limit);
    return r % n;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace opinet
