#ifndef POPCACHE_RNG_HPP
#define POPCACHE_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace popcache {

// Every stochastic component draws from its own stream derived from one
// master seed. The engine (mt19937_64) has a fully specified output
// sequence; the variate conversions below are ours so that streams are
// identical across standard library implementations.

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the named stream of a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Exponential variate with the given rate.
  double exponential(double rate);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace popcache

#endif  // POPCACHE_RNG_HPP
