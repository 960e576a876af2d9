#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ppclip {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Stateless: output is a pure function of
/// (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Per-trial random stream. Every draw is addressed by
/// (seed | trial, step, draw index), so a trial's randomness is independent
/// of which worker runs it and of how many draws earlier steps consumed.
///
/// `tag` separates unrelated consumers (trajectories, oracle sample-average
/// approximations, dataset synthesis) that share a seed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t trial, std::uint32_t tag = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        trial_(static_cast<std::uint32_t>(trial)),
        tag_(tag ^ static_cast<std::uint32_t>(trial >> 32)) {}

  /// Position the stream at the first draw of step `t`.
  void seek_step(std::uint64_t t) {
    step_ = t;
    draw_ = 0;
    avail_ = 0;
    has_spare_normal_ = false;
  }

  std::uint64_t step() const noexcept { return step_; }

  std::uint32_t next_u32() {
    if (avail_ == 0) refill();
    return block_[4 - avail_--];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n) by multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    const unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(prod >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; spare value is cached within a step.
  double normal() {
    if (has_spare_normal_) {
      has_spare_normal_ = false;
      return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(angle);
    has_spare_normal_ = true;
    return r * std::cos(angle);
  }

 private:
  void refill() {
    const Philox4x32::Counter ctr{draw_, static_cast<std::uint32_t>(step_),
                                  static_cast<std::uint32_t>(step_ >> 32) ^ tag_, trial_};
    block_ = Philox4x32::apply(ctr, key_);
    ++draw_;
    avail_ = 4;
  }

  Philox4x32::Key key_;
  std::uint32_t trial_;
  std::uint32_t tag_;
  std::uint64_t step_ = 0;
  std::uint32_t draw_ = 0;
  Philox4x32::Counter block_{};
  int avail_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

namespace stream_tag {
inline constexpr std::uint32_t trajectory = 0;
inline constexpr std::uint32_t oracle = 0x0A000000u;
inline constexpr std::uint32_t dataset = 0x0D000000u;
inline constexpr std::uint32_t constants = 0x0C000000u;
}  // namespace stream_tag

}  // namespace ppclip
