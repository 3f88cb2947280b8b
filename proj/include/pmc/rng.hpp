#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace pmc {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The output is a pure function of (key, counter), which is what makes runs
/// reproducible regardless of how tasks are scheduled: every task gets its
/// own key derived from the master seed and a task index, and draws from a
/// counter that starts at zero.
///
/// Satisfies UniformRandomBitGenerator, but callers that need bit-exact
/// output across standard libraries should use `uniform01()` and
/// `uniform_below()` rather than <random> distributions.
class Philox {
 public:
  using result_type = std::uint32_t;

  explicit Philox(std::uint64_t key = 0) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (lane_ == 4) refill();
    return block_[lane_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return (hi << 32) | lo;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, bound); bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;

  /// Skip the stream to an absolute block position.
  void seek(std::uint64_t block) noexcept {
    counter_ = block;
    lane_ = 4;
  }

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned lane_ = 4;
};

/// SplitMix64 finaliser; used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream key for task `index` under `master_seed`.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return mix64(mix64(master_seed) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Philox make_stream(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return Philox(derive_seed(master_seed, index));
}

}  // namespace pmc
