#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "evmirror/constants.hpp"

namespace evmirror::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block is a
// pure function of (counter, key), so any atom's draw sequence can be produced
// on any worker without shared state: results do not depend on thread count.

struct Block {
  std::array<std::uint32_t, 4> w{};
};

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, std::uint32_t k0, std::uint32_t k1) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
       static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
}

}  // namespace detail

inline Block philox4x32(Block counter, std::uint32_t key0, std::uint32_t key1) {
  auto& c = counter.w;
  detail::philox_round(c, key0, key1);
  for (int round = 1; round < 10; ++round) {
    key0 += detail::kWeyl0;
    key1 += detail::kWeyl1;
    detail::philox_round(c, key0, key1);
  }
  return counter;
}

/// Domain-separation constants: streams with equal (seed, id) but different
/// purpose never overlap.
enum class Purpose : std::uint32_t {
  kSamplePosition = 0x01,
  kSampleVelocity = 0x02,
  kBounceKick = 0x03,
  kImageNoise = 0x04,
};

/// One independent random stream, typically per atom. Layout:
/// key = seed, counter = (draw_lo, draw_hi, stream_id_lo, stream_id_hi ^ purpose<<24).
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id, Purpose purpose)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        id_lo_(static_cast<std::uint32_t>(stream_id)),
        id_hi_(static_cast<std::uint32_t>(stream_id >> 32) ^
               (static_cast<std::uint32_t>(purpose) << 24)) {}

  std::uint32_t next_u32() {
    if (avail_ == 0) refill();
    return buf_.w[4 - avail_--];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log1p(-uniform()));
    const double phi = 2.0 * kPi * uniform();
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  void refill() {
    buf_ = philox4x32({{static_cast<std::uint32_t>(draw_), static_cast<std::uint32_t>(draw_ >> 32),
                        id_lo_, id_hi_}},
                      key0_, key1_);
    ++draw_;
    avail_ = 4;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t id_lo_, id_hi_;
  std::uint64_t draw_ = 0;
  Block buf_{};
  int avail_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace evmirror::rng
