#pragma once

// Counter-based random numbers, reproducible across platforms and compilers.
//
// Draw number k (0-based) of stream s under seed S is
//   mix64(key + (k + 1) * 0x9E3779B97F4A7C15),  key = mix64(S ^ mix64(s + 0xD1B54A32D192ED03))
// where mix64 is the SplitMix64 finaliser. Streams are independent of the
// order in which they are consumed.

#include <cmath>
#include <cstdint>

namespace sarsim {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(seed ^ mix64(stream + 0xD1B54A32D192ED03ULL))) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  /// Uniform in (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Exp(1), strictly positive.
  double exponential() { return -std::log(uniform()); }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sarsim
