#pragma once

#include <cmath>
#include <cstdint>

namespace striplab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream identity tags. A stream is named by (master seed, tag, index);
// the same triple always yields the same draws, independent of thread
// count or call order, which is what makes replica-parallel Monte Carlo
// bit-reproducible here.
namespace stream {
inline constexpr std::uint64_t kEnvLayer = 0x01;
inline constexpr std::uint64_t kEnvReplica = 0x02;
inline constexpr std::uint64_t kWalk = 0x03;
inline constexpr std::uint64_t kStable = 0x04;
inline constexpr std::uint64_t kBootstrap = 0x05;
inline constexpr std::uint64_t kGeneric = 0x06;
}  // namespace stream

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t s = seed;
  (void)splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + tag;
  (void)splitmix64(s);
  s ^= index * 0x100000001b3ULL + tag;
  return splitmix64(s);
}

// xoshiro256++ seeded through splitmix64 from a (seed, tag, index) triple.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t s = derive_seed(seed, tag, index);
    s_[0] = splitmix64(s);
    s_[1] = splitmix64(s);
    s_[2] = splitmix64(s);
    s_[3] = splitmix64(s);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0,1) with 53 significant bits
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform on (0,1], safe under log()
  double uniform_pos() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  double exponential() { return -std::log(uniform_pos()); }

  // Marsaglia polar method; one value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
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
    have_spare_ = true;
    return u * f;
  }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace striplab
