#pragma once

// Deterministic RNG built on mt19937_64. Distributions are implemented
// inline (Box-Muller without caching) so sequences are identical across
// standard libraries and serialize exactly.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace hvtr {

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() {
    return (gen_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  uint64_t index(uint64_t n) {
    // rejection sampling keeps the distribution exact
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.141592653589793 * u2);
  }

  uint64_t raw() { return gen_(); }

  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
  }

  // Mixes a base seed with a stream id (iteration counter, frame id...) so
  // per-step randomness is a pure function of (seed, id) and resume is exact.
  static uint64_t mix(uint64_t seed, uint64_t id) {
    uint64_t h = seed ^ (id + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hvtr
