#pragma once

#include <cmath>
#include <cstdint>

#include "cbtsim/types.hpp"

namespace cbtsim {

// xoshiro256++ seeded through splitmix64. Hand-rolled so that streams are
// identical across standard libraries; std:: distributions are
// implementation-defined and would break bit-reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, n). Modulo bias is irrelevant at simulation scales.
  std::uint64_t below(std::uint64_t n) { return n ? u64() % n : 0; }

  // Uniform in [lo, hi], inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Uniform in [0, 1) with 53 bits of entropy.
  double unit() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  // Exponential with the given mean, in the mean's unit, floored to >= 1.
  Time exp_time(Time mean) {
    double u = unit();
    if (u <= 0.0) u = 0x1.0p-53;
    double v = -std::log(u) * static_cast<double>(mean);
    if (v < 1.0) v = 1.0;
    if (v > 9e17) v = 9e17;
    return static_cast<Time>(v);
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4] = {};
};

}  // namespace cbtsim
