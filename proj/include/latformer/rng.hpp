#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace latformer {

// SplitMix64 (Steele, Lea & Flood 2014). All randomness in the project goes
// through this generator: std:: distributions are implementation-defined and
// would break cross-platform reproducibility of seeded suites.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) via Lemire's multiply-shift.
  uint64_t next_below(uint64_t bound) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Standard normal via Box-Muller (two draws per sample, no cached state).
  double next_gaussian() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Independent child stream; forking advances this stream by one draw.
  SplitMix64 fork(uint64_t tag) {
    return SplitMix64(next() ^ (0x9e3779b97f4a7c15ull * (tag + 1)));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace latformer
