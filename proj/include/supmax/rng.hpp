#pragma once

// Counter-based random streams. Every variate is a pure function of
// (seed, stream, counter), so results never depend on how work is split
// across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace supmax::rng {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;
};

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for the index-th child of a parent seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

namespace detail {

// 53-bit uniform in (0, 1]; never returns 0 so log() is safe.
inline double to_unit_open0(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

inline Philox4x32::Key key_of(std::uint64_t seed) noexcept {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

}  // namespace detail

/// Standard normal variates addressed by (sample index, coordinate).
///
/// Coordinates 2j and 2j+1 of a sample come from one Philox block through
/// Box-Muller, so the vector for a given sample index is identical no matter
/// which chunk or thread produces it.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream_id) noexcept
      : key_(detail::key_of(seed)), stream_id_(stream_id) {}

  void fill(std::uint64_t sample, std::span<double> out) const noexcept {
    const auto lo = static_cast<std::uint32_t>(sample);
    const auto hi = static_cast<std::uint32_t>(sample >> 32);
    const std::size_t n = out.size();
    for (std::size_t j = 0; 2 * j < n; ++j) {
      const auto r = Philox4x32::block({lo, hi, static_cast<std::uint32_t>(j), stream_id_}, key_);
      const double u1 = detail::to_unit_open0(r[0], r[1]);
      const double u2 = detail::to_unit_open0(r[2], r[3]);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      out[2 * j] = radius * std::cos(angle);
      if (2 * j + 1 < n) out[2 * j + 1] = radius * std::sin(angle);
    }
  }

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_id_;
};

/// Sequential generator on top of Philox: a counter walks forward per draw.
/// Used for instance generation where the draw order is fixed.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream_id) noexcept
      : key_(detail::key_of(seed)), stream_id_(stream_id) {}

  std::uint64_t next_u64() noexcept {
    refill_if_empty();
    const std::uint64_t v = (std::uint64_t{buffer_[used_]} << 32) | buffer_[used_ + 1];
    used_ += 2;
    return v;
  }

  /// Uniform in (0, 1].
  double uniform() noexcept {
    refill_if_empty();
    const double u = detail::to_unit_open0(buffer_[used_], buffer_[used_ + 1]);
    used_ += 2;
    return u;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept {
    const std::uint64_t span = hi - lo + 1;
    return span == 0 ? next_u64() : lo + next_u64() % span;
  }

 private:
  void refill_if_empty() noexcept {
    if (used_ < 4) return;
    buffer_ = Philox4x32::block({static_cast<std::uint32_t>(counter_),
                                 static_cast<std::uint32_t>(counter_ >> 32), 0xA5A5A5A5u, stream_id_},
                                key_);
    ++counter_;
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_id_;
  std::uint64_t counter_ = 0;
  Philox4x32::Counter buffer_{};
  std::size_t used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace supmax::rng
