#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace refl {

// splitmix64 step; the workhorse for seeding and key derivation.
inline std::uint64_t splitmix_next(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive a stream key from a master seed and a tag tuple. Distinct tuples
// give independent streams, so per-epoch and per-row draws stay reproducible
// no matter how work is scheduled.
inline std::uint64_t mix_key(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t k = seed;
  for (std::uint64_t t : tags) {
    std::uint64_t s = k;
    k = splitmix_next(s) ^ (t + 0x9e3779b97f4a7c15ull + (k << 6) + (k >> 2));
  }
  std::uint64_t s = k;
  return splitmix_next(s);
}

// xoshiro256**. Fixed algorithm, no libc dependence, so draws are identical
// for a given seed on every platform and thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix_next(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1); safe as a log argument
  double uniform_open() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform in [0, n), n >= 1. Lemire's unbiased bounded draw.
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = (unsigned __int128)next_u64() * n;
    auto lo = (std::uint64_t)m;
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = (unsigned __int128)next_u64() * n;
        lo = (std::uint64_t)m;
      }
    }
    return (std::uint64_t)(m >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = (std::size_t)below(i);
      T tmp = v[i - 1];
      v[i - 1] = v[j];
      v[j] = tmp;
    }
  }

 private:
  static constexpr double kPi = 3.14159265358979323846264338327950288;
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace refl
