#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

namespace aap {

// xoshiro256** with splitmix64 seeding. Standard-library distributions are
// implementation-defined, so sampling transforms live here too; the four-word
// state makes run state trivially serializable for exact training resume.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Independent deterministic substream (e.g. per environment worker).
  static Rng substream(uint64_t seed, uint64_t stream) {
    uint64_t x = seed;
    uint64_t a = splitmix64(x);
    uint64_t mixed = a ^ (stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
    return Rng(splitmix64(mixed));
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller; one draw discarded to keep state consumption fixed per call.
  double normal(double mean, double stddev) {
    const double u1 = 1.0 - uniform();  // avoid log(0)
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  double normal_truncated(double mean, double stddev, double nsigma) {
    if (stddev <= 0.0) return mean;
    double z;
    do {
      z = normal(0.0, 1.0);
    } while (std::abs(z) > nsigma);
    return mean + stddev * z;
  }

  // Samples an index from normalized probabilities.
  template <typename F>
  int categorical(const F* probs, int n) {
    const double u = uniform();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += static_cast<double>(probs[i]);
      if (u < acc) return i;
    }
    return n - 1;
  }

  const std::array<uint64_t, 4>& state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // FNV-1a, used for config hashing and named substreams.
  static uint64_t hash64(const std::string& s, uint64_t h = 0xCBF29CE484222325ULL) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> s_{};
};

}  // namespace aap
