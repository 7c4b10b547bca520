#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace drunet {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms, used to turn sample ids into key material.
inline constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  std::uint64_t epoch = 0;

  static RngKey of(std::uint64_t seed, std::string_view sample_id, std::uint64_t epoch) noexcept {
    return {seed, hash_string(sample_id), epoch};
  }
  std::uint64_t mix() const noexcept { return splitmix64(splitmix64(splitmix64(seed) ^ sample) ^ epoch); }
};

/// Counter-based generator: output i is a pure function of (key, stream, i),
/// so a stream can be recreated anywhere from its key alone. Satisfies
/// UniformRandomBitGenerator for use with <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key, std::uint64_t stream = 0) noexcept
      : base_(splitmix64(key ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}
  explicit CounterRng(const RngKey& key, std::uint64_t stream = 0) noexcept : CounterRng(key.mix(), stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return splitmix64(base_ + 0x9E3779B97F4A7C15ull * counter_++); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace drunet
