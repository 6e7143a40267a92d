//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <cstdint>

namespace ita {

// Deterministic 64-bit counter-based generator used for every fixture and
// sweep. The algorithm is written out in the README; committed fixtures
// depend on it staying exactly as it is.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi], both ends inclusive. The modulo bias is below
  // 2^-32 for the ranges used here (always narrower than 2^32).
  std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Uniform signed 8-bit code.
  std::int8_t next_code() {
    return static_cast<std::int8_t>(static_cast<int>(next_u64() & 0xff) - 128);
  }

  // Standard normal draw; consumes two uniforms per call.
  double next_gaussian() {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps the log finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692528676655900577 * u2);
  }

  // Decorrelated child stream, e.g. one per row of a sweep. Scheduling a
  // sweep across threads must not change which stream a row sees.
  Rng fork(std::uint64_t index) const {
    return Rng(state_ + 0x9e3779b97f4a7c15ULL * (index + 1));
  }

 private:
  std::uint64_t state_;
};

}  // namespace ita
