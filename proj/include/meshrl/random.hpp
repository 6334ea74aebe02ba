#ifndef MESHRL_RANDOM_HPP_
#define MESHRL_RANDOM_HPP_

// Portable pseudo-randomness. Standard <random> distributions are
// implementation-defined, so everything here maps raw 64-bit outputs to
// values by hand to keep traces identical across toolchains.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace meshrl {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based hash of a key sequence: hash_counter({seed, service, t}).
constexpr std::uint64_t hash_counter(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x243f6a8885a308d3ull;
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

// [0,1) with 53 random bits.
constexpr double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Standard normal from two counter draws (Box-Muller, cosine branch).
inline double counter_normal(std::uint64_t key) {
  const double u1 = 1.0 - to_unit(splitmix64(key));  // (0,1]
  const double u2 = to_unit(splitmix64(key ^ 0x5851f42d4c957f2dull));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential generator (splitmix64 stream) for sampling and initialization.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform() { return to_unit(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection, unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = next();
    while (x >= limit);
    return x % n;
  }

  double normal() { return counter_normal(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace meshrl

#endif  // MESHRL_RANDOM_HPP_
