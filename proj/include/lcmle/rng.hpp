// Counter-based random streams keyed by (seed, stream coordinates).
#ifndef LCMLE_RNG_HPP
#define LCMLE_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace lcmle {

/// SplitMix64-style generator whose i-th output is a pure function of
/// (key, i). The key is derived from a seed and any number of stream
/// coordinates, so replication (seed, n, rep) draws the same numbers no
/// matter which thread runs it or in what order.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) : key_(mix(seed)) {
    for (std::uint64_t s : stream) key_ = mix(key_ ^ mix(s + 0x632be59bd9b4e019ULL));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lcmle

#endif  // LCMLE_RNG_HPP
