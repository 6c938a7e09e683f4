#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace batchrl {

/// Purpose tags keep the streams used for different jobs apart even when they
/// belong to the same (env, agent) pair.
enum class StreamPurpose : std::uint32_t {
  Reset = 1,
  Action = 2,
  Variation = 3,
  Dynamics = 4,
  Shuffle = 5,
  Init = 6,
};

struct StreamId {
  std::uint32_t env = 0;
  std::uint32_t agent = 0;
  StreamPurpose purpose = StreamPurpose::Reset;
};

/// SplitMix64 finalizer, used to fold a seed and a stream id into a key.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Philox4x32-10 block function: maps (counter, key) to four 32-bit words.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMulA = 0xD2511F53u;
  constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  constexpr std::uint32_t kWeylB = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMulA} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMulB} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

/// Counter-based random stream. The output is a pure function of
/// (seed, stream id, counter), so any worker lane can draw from it and get
/// the same numbers. Each Philox block yields four 32-bit words; the 128-bit
/// counter indexes blocks.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, StreamId id) noexcept { reseed(seed, id); }

  void reseed(std::uint64_t seed, StreamId id) noexcept {
    const std::uint64_t sid = (std::uint64_t{id.env} << 32) ^
                              (std::uint64_t{id.agent} << 8) ^
                              static_cast<std::uint64_t>(id.purpose);
    const std::uint64_t k = splitmix64(seed ^ splitmix64(sid));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    counter_lo_ = 0;
    counter_hi_ = 0;
    word_ = 4;
  }

  std::uint64_t counter_lo() const noexcept { return counter_lo_; }
  std::uint64_t counter_hi() const noexcept { return counter_hi_; }

  std::uint32_t next_u32() noexcept {
    if (word_ == 4) refill();
    return block_[word_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's multiply-shift; the bias is below
  /// 2^-32 for the small n used here.
  std::uint32_t below(std::uint32_t n) noexcept {
    return static_cast<std::uint32_t>((std::uint64_t{next_u32()} * n) >> 32);
  }

  /// Standard normal via Box-Muller; one draw per call, no cached spare so
  /// the stream position depends only on how many draws were requested.
  double normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  void refill() noexcept {
    block_ = philox4x32({static_cast<std::uint32_t>(counter_lo_),
                         static_cast<std::uint32_t>(counter_lo_ >> 32),
                         static_cast<std::uint32_t>(counter_hi_),
                         static_cast<std::uint32_t>(counter_hi_ >> 32)},
                        key_);
    if (++counter_lo_ == 0) ++counter_hi_;
    word_ = 0;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_lo_ = 0;
  std::uint64_t counter_hi_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned word_ = 4;
};

}  // namespace batchrl
