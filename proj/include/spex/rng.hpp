// Seedable, stream-splittable random number generation.
//
// All stochastic routines in the library draw from Rng streams derived
// deterministically from a user seed, so results are reproducible across
// runs and independent of thread count.

#ifndef SPEX_RNG_HPP
#define SPEX_RNG_HPP

#include <cmath>
#include <cstdint>

namespace spex {

// SplitMix64: used for seeding and for hashing stream ids.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ by Blackman & Vigna (public domain reference implementation).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bULL) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
    spare_valid_ = false;
  }

  std::uint64_t next_u64() {
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

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Marsaglia's polar method with a cached spare.
  double normal() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    spare_valid_ = true;
    return u * f;
  }

  double exponential() { return -std::log(uniform()); }

  // Unit Pareto: P(X > x) = 1/x for x >= 1.
  double pareto() { return 1.0 / uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection-free enough for our n << 2^64.
    return next_u64() % n;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool spare_valid_ = false;
};

// Derives an independent stream seed from a master seed and stream ids.
// Hash-combining distinct ids yields decorrelated streams, so replicate i
// can be simulated by any thread with identical output.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id0,
                                 std::uint64_t id1 = 0) {
  std::uint64_t s = master ^ 0x6a09e667f3bcc909ULL;
  splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ULL * (id0 + 1);
  splitmix64(s);
  s ^= 0xc2b2ae3d27d4eb4fULL * (id1 + 1);
  return splitmix64(s);
}

}  // namespace spex

#endif  // SPEX_RNG_HPP
