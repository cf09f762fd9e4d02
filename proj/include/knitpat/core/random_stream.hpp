#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace knitpat {

/// Counter-based random stream: draw i is splitmix64(seed, i), so the whole
/// sequence is a pure function of the seed and independent of the standard
/// library's distribution implementations.
class RandomStream {
 public:
  constexpr explicit RandomStream(std::uint64_t seed = 0) : seed_(seed) {}

  constexpr std::uint64_t seed() const { return seed_; }
  constexpr std::uint64_t draws() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t next_u64() {
    const std::uint64_t key = seed_ ^ mix(counter_++);
    return mix(key);
  }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double low, double high) {
    return low + (high - low) * next_unit();
  }

  constexpr bool bernoulli(double p) { return next_unit() < p; }

  /// Unbiased integer in [0, bound). bound must be > 0.
  constexpr std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  /// Independent stream keyed by `key`; does not advance this stream.
  constexpr RandomStream substream(std::uint64_t key) const {
    return RandomStream(mix(seed_ ^ mix(key ^ 0x243f6a8885a308d3ULL)));
  }

  template <typename T>
  constexpr void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace knitpat
