#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fsq {

// All randomness in a run flows from one master seed through named
// sub-streams, so perturbing one stream (say, replay sampling) leaves the
// others bit-identical. Draws go through our own uniform helpers rather than
// std distributions, which keeps sequences stable across standard libraries.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class RngStream {
 public:
  RngStream() : gen_(0) {}
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t integer(std::uint64_t n) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(integer(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

/// Independent stream derived from (seed, name).
inline RngStream make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t state = seed ^ detail::fnv1a(name);
  // run the mix twice so adjacent seeds do not produce correlated engines
  std::uint64_t s = detail::splitmix64(state);
  s ^= detail::splitmix64(state);
  return RngStream(s);
}

/// The three named streams a training run draws from.
struct RngPool {
  explicit RngPool(std::uint64_t seed)
      : env(make_stream(seed, "env")),
        agent(make_stream(seed, "agent")),
        replay(make_stream(seed, "replay")) {}

  RngStream env;
  RngStream agent;
  RngStream replay;
};

}  // namespace fsq
