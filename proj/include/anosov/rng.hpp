#pragma once
// Seeded random sampling.  The engine is std::mt19937_64 (bit-exact across
// platforms per the standard); doubles are produced by explicit bit
// manipulation rather than std::uniform_real_distribution, whose output is
// implementation-defined.  Sampling always happens serially before parallel
// processing so that draws never depend on scheduling.

#include <cstdint>
#include <random>

#include "anosov/common.hpp"

namespace anosov {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  TorusPoint point() {
    double a = uniform();
    double b = uniform();
    return TorusPoint(a, b);
  }

  Vec2 direction() {
    double t = uniform(0.0, kTwoPi);
    return {std::cos(t), std::sin(t)};
  }

 private:
  std::mt19937_64 eng_;
};

// Derives independent per-purpose Rng streams from the single config seed, so
// adding draws to one pipeline stage never shifts the draws of another.
class RngFactory {
 public:
  explicit RngFactory(std::uint64_t seed) : seed_(seed) {}
  Rng stream(std::uint64_t tag) const {
    return Rng(splitmix64(splitmix64(seed_) ^ splitmix64(tag)));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace anosov
