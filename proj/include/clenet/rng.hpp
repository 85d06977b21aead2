#pragma once

#include <cmath>
#include <cstdint>

namespace clenet {

// Stream ids keep independent consumers (data generation, weight init,
// dropout, shuffling, augmentation) on non-overlapping sequences.
namespace streams {
inline constexpr uint64_t kDataGen = 1;
inline constexpr uint64_t kInit = 2;
inline constexpr uint64_t kDropout = 3;
inline constexpr uint64_t kShuffle = 4;
inline constexpr uint64_t kAugment = 5;
}  // namespace streams

// Counter-based generator: draw i is a pure function of (seed, stream, i),
// so identical (seed, stream, draw-count) reproduces the same sequence on
// every run and platform. No libc RNG state is involved.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream)
      : key_(mix(mix(seed + 0x9E3779B97F4A7C15ull) ^
                 mix(stream + 0xD1B54A32D192ED03ull))) {}

  uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

  // [0,1) with 53-bit resolution.
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Integer in [0,n). Fixed-point multiply; one draw per call.
  uint64_t next_below(uint64_t n) {
    return uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Box-Muller. The paired deviate is cached, so draws come in twos.
  double next_gaussian(double sigma) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * sigma;
    }
    double u1 = 1.0 - next_unit();  // (0,1], keeps log() finite
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta) * sigma;
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable 64-bit sub-seed for derived jobs (per fold, per patient, ...).
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
  Rng r(seed, 0xFEEDFACEull + salt);
  return r.next_u64();
}

}  // namespace clenet
