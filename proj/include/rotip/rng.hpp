#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rotip/errors.hpp"

namespace rotip {

// splitmix64 finalizer; used to derive decorrelated per-purpose stream seeds
// from one run seed so that adding a consumer never shifts another stream.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix_seed(seed ^ mix_seed(tag));
}

// Deterministic generator. mt19937_64 output is pinned by the standard, and
// all double conversions below avoid std::*_distribution (whose sequences are
// implementation-defined), so streams are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased-enough index in [0, n); Lemire multiply-shift, no rejection loop
  // so the draw count per call is fixed.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw PreconditionViolation("Rng::index: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, trigonometric form. Always consumes exactly two draws and
  // never caches the spare value, so the stream position stays predictable.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // |N(0, sigma)| with sigma chosen so the mean equals `mean`: for a folded
  // normal, E|X| = sigma * sqrt(2/pi).
  double folded_normal_with_mean(double mean) {
    return std::abs(normal(0.0, mean * std::sqrt(M_PI / 2.0)));
  }

  // geometric number of trials >= 1 with success probability p (mean 1/p)
  int geometric(double p) {
    if (p <= 0.0 || p > 1.0)
      throw PreconditionViolation("Rng::geometric: p must be in (0, 1]");
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    if (p == 1.0) return 1;
    return 1 + static_cast<int>(std::floor(std::log(u) / std::log1p(-p)));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace rotip
