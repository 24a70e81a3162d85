#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace p23d {

// Seeded generator with a stream that is stable across releases.
// Algorithm (versioned as rng_algo id 1, recorded in checkpoints):
//   state init: splitmix64 applied four times to the seed,
//   generator:  xoshiro256++,
//   uniform:    top 53 bits scaled to [0, 1),
//   normal:     Box-Muller on two uniforms, spare cached.
class Rng {
 public:
  static constexpr uint32_t kAlgoId = 1;

  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : s_) {
      x += 0x9e3779b97f4a7c15ull;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      s = z ^ (z >> 31);
    }
    has_spare_ = false;
  }

  // Derives an independent stream for (seed, index) pairs, e.g. per-run
  // streams in batch sweeps.
  static Rng derive(uint64_t seed, uint64_t index) {
    return Rng(seed ^ (0x517cc1b727220a95ull * (index + 1)));
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(6.283185307179586476925286766559 * u2);
    has_spare_ = true;
    return mag * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::vector<double> normal_vec(size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) v = normal();
    return out;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace p23d
