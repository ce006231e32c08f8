#pragma once

#include <cstdint>

namespace xattrib {

// All randomness in the toolkit is derived from these fixed-width integer
// mixes, never from platform distributions, so every value is reproducible
// across compilers and matches tests/oracle/toy_lm_oracle.py bit for bit.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kTagSalt = 0xD1B54A32D192ED03ull;
inline constexpr std::uint64_t kIndexSalt = 0x8CB92BA72F3D8DD7ull;

// splitmix64 finalizer, bijective on 64-bit values.
constexpr std::uint64_t fmix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Element `index` of the named stream (seed, tag). Streams with different
// tags are decorrelated even for equal seeds.
constexpr std::uint64_t stream_hash(std::uint64_t seed, std::uint64_t tag,
                                    std::uint64_t index) {
  std::uint64_t h = fmix64(seed + kGolden);
  h = fmix64(h ^ (tag + kTagSalt));
  h = fmix64(h ^ (index + kIndexSalt));
  return h;
}

// Top 53 bits as a double in [0, 1).
constexpr double u01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1p-53;
}

constexpr double unit_param(std::uint64_t seed, std::uint64_t tag,
                            std::uint64_t index) {
  return u01(stream_hash(seed, tag, index));
}

// Symmetric variant in (-1, 1).
constexpr double sym_param(std::uint64_t seed, std::uint64_t tag,
                           std::uint64_t index) {
  return (u01(stream_hash(seed, tag, index)) - 0.5) * 2.0;
}

// Counter-mode sequential generator for search sampling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(fmix64(seed + 0x5851F42D4C957F2Dull)) {}

  std::uint64_t next() {
    state_ += kGolden;
    return fmix64(state_);
  }

  double next_u01() { return u01(next()); }

  // Uniform draw from {0, ..., n-1} by truncating next_u01() * n.
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(next_u01() * static_cast<double>(n));
  }

 private:
  std::uint64_t state_;
};

}  // namespace xattrib
