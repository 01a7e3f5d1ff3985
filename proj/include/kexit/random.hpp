#pragma once

// Counter-based random streams. A stream is keyed by (seed, index, substream)
// and produces splitmix64(key + n * golden) for n = 1, 2, ... so any event or
// trajectory can be regenerated without replaying the others.

#include <cstdint>
#include <limits>
#include <random>

namespace kexit {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named substreams; keep values stable, they are part of the reproducibility contract.
enum class Substream : std::uint64_t {
  kExitTime = 1,
  kExitLabel = 2,
  kNoise = 3,
  kSampling = 4,
};

class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t index, Substream stream)
      : key_(derive_key(seed, index, static_cast<std::uint64_t>(stream))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + (++counter_) * kGolden); }

  /// Uniform on (0, 1], 53-bit resolution.
  double uniform_open_closed() {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return gauss_(*this); }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t index,
                                            std::uint64_t stream) {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ (index * 0xd1b54a32d192ed03ULL));
    k = splitmix64(k ^ (stream * 0xabc98388fb8fac03ULL));
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Derive a child seed for a named experiment stage from the top-level seed.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

}  // namespace kexit
