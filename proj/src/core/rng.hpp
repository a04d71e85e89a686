#pragma once

#include <cmath>
#include <cstdint>

namespace voxcond {

/*
 * Deterministic PRNG used everywhere randomness is needed: a xoshiro256**
 * stream whose state is filled by SplitMix64 from a user seed. Both
 * algorithms are fixed here so results are identical across platforms and
 * standard libraries. References: Blackman & Vigna, https://prng.di.unimi.it/
 */
struct SplitMix64 {
  uint64_t state;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

class Rng {
public:
  explicit Rng(uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
    has_gauss_ = false;
  }

  /* Derive an independent stream for a named sub-purpose. */
  Rng fork(uint64_t stream_id) const {
    SplitMix64 sm(s_[0] ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    return Rng(sm.next());
  }

  uint64_t next_u64() {
    uint64_t result = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /* Uniform in [0, 1) with 53 random bits. */
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /* Uniform integer in [0, n). Modulo over 64 bits; bias is negligible
   * for the small ranges used here and determinism is what matters. */
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + int(uniform_index(uint64_t(hi - lo + 1)));
  }

  /* Standard normal via Box-Muller on the raw uniforms
   * (std::normal_distribution is not portable across libraries). */
  double normal() {
    if (has_gauss_) {
      has_gauss_ = false;
      return gauss_;
    }
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    gauss_ = r * std::sin(a);
    has_gauss_ = true;
    return r * std::cos(a);
  }

private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  double gauss_ = 0.0;
  bool has_gauss_ = false;
};

}  // namespace voxcond
