#pragma once

#include <cstdint>

namespace lazyla {

// Counter-based uniform generator: value n of a stream with key k is
// finalize(k + (n + 1) * golden), the SplitMix64 output function. Any
// element of a fill can be generated independently of the others, so every
// backend produces the same bits for the same (key, counter) regardless of
// how it partitions the work.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) noexcept {
    return mix(key + (counter + 1) * kGolden);
  }

  template <class T>
  static constexpr T uniform(std::uint64_t key, std::uint64_t counter) noexcept {
    const std::uint64_t b = bits(key, counter);
    if constexpr (sizeof(T) == 4) {
      return static_cast<T>(b >> 40) * static_cast<T>(0x1.0p-24);
    } else {
      return static_cast<T>(b >> 11) * static_cast<T>(0x1.0p-53);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Reserves n consecutive counters and returns the first.
  std::uint64_t advance(std::uint64_t n) noexcept {
    const std::uint64_t first = counter_;
    counter_ += n;
    return first;
  }

  // Derives an independent stream; the parent moves on so repeated splits differ.
  CounterRng split() noexcept {
    CounterRng child;
    child.key_ = mix(key_ ^ mix(++splits_ + 0x3c6ef372fe94f82bULL));
    return child;
  }

 private:
  std::uint64_t key_ = mix(0x6a09e667f3bcc909ULL);
  std::uint64_t counter_ = 0;
  std::uint64_t splits_ = 0;
};

}  // namespace lazyla
