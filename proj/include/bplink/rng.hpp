#pragma once

#include <cstdint>
#include <initializer_list>

namespace bplink {

// Counter-based random streams built on the splitmix64 finalizer.
//
// A stream is identified by a 64-bit key; draw i of a stream is
// mix64(key + (i+1) * GOLDEN). Keys are derived from (seed, purpose tag,
// indices...) by folding each element through the same mixer, so any
// (seed, stream-path, draw-index) triple addresses one fixed uniform,
// independent of thread scheduling or worker count.

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace rng_domain {
// Purpose tags keeping unrelated consumers of the same seed decorrelated.
inline constexpr std::uint64_t simulate = 0x51;
inline constexpr std::uint64_t tvd_path = 0x52;
inline constexpr std::uint64_t sweep_cell = 0x53;
inline constexpr std::uint64_t test = 0x54;
}  // namespace rng_domain

class RngStream {
public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit RngStream(std::uint64_t key) : key_(key), counter_(0) {}

  static std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t k = mix64(seed + kGolden);
    for (std::uint64_t e : path) k = mix64(k ^ mix64(e + kGolden));
    return k;
  }

  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return RngStream(derive_key(seed, path));
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace bplink
