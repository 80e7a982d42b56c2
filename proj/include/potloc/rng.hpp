#pragma once

#include <cmath>
#include <cstdint>

namespace potloc {

// Counter-based 64-bit generator (splitmix64). A (seed, stream) pair fully
// determines the sequence, so per-video streams can run in parallel and still
// produce byte-identical datasets.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : state_(scramble(seed) ^ scramble(stream * 0xda942042e4dd58b5ull + 1)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return scramble(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive. Modulo bias is irrelevant at the
  // range sizes used here and keeps the sequence easy to reproduce elsewhere.
  int64_t next_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_u64() %
                                     static_cast<uint64_t>(hi - lo + 1));
  }

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; draws two uniforms per call.
  double next_normal() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586 * u2);
  }

 private:
  static uint64_t scramble(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

}  // namespace potloc
