//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ita {

// Derived shift-softmax constants for B-bit codes. All exponentials are
// realized as right shifts: 2^((x - max) >> (B - log2(B))).
struct SoftmaxConstants {
  int bits = 8;                  // B
  int shift_amount = 5;          // B - log2(B)
  int unit = 128;                // 2^(B-1), the contribution of the maximum
  std::uint32_t sum_max = 32767; // saturating denominator limit, 2^(2B-1)-1
  std::uint32_t inv_dividend = 32640;  // (2^B - 1) * unit
  double epsilon_prime = 0.03125;      // B / 2^B, code-to-exponent scale

  // Rejects B that is not a power of two in [4, 8].
  static SoftmaxConstants for_bits(int b);
};

// Probabilities produced by element normalization: unsigned codes with an
// implicit scale of 1/(2^B - 1).
struct ProbMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> values;  // row-major

  ProbMatrix() = default;
  ProbMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0) {}
  std::uint8_t& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Restoring 16-bit division, one quotient bit per cycle.
struct DivResult {
  std::uint16_t quotient = 0;
  int cycles = 16;
};
DivResult serial_divide_u16(std::uint16_t dividend, std::uint16_t divisor);

enum class SoftmaxPhase {
  kDenominatorAccumulation,
  kDenominatorInversion,
  kElementNormalization,
};

// Streaming row-wise softmax over parts of a row. One state instance covers
// a block of up to M rows; max_buf and sum_buf hold one entry per row.
class SoftmaxState {
 public:
  // Fault injection for suite-sensitivity checks only.
  enum class DaPolicy {
    // Normative: the stale accumulated sum is rescaled when the maximum
    // rises; incoming elements always accumulate against the merged
    // maximum. This is what makes streaming bit-exact to the single-pass
    // form whenever the global maximum sits in the first part.
    kStaleRescale,
    // Deliberately broken: the incoming part is summed against its own
    // local maximum and rescaled as one lump. Plausible but wrong; the
    // equivalence suite must catch it.
    kPartLumpRescale,
  };

  explicit SoftmaxState(int rows, SoftmaxConstants c = SoftmaxConstants{});

  // Folds one part (a contiguous slice of the row) into the running
  // (max, sum) pair. If the part raises the maximum, the stored sum is
  // rescaled by >> ((max_new - max_old) >> shift_amount) first; every part
  // element then adds unit >> ((max_new - x) >> shift_amount). The sum
  // saturates at sum_max. Only legal in the DA phase.
  void da_update(int row, std::span<const std::int8_t> part,
                 DaPolicy policy = DaPolicy::kStaleRescale);

  // inv = floor((2^B - 1) * unit / sum), via the serial divider model.
  // Legal once the row has accumulated at least one part.
  void di_invert(int row);

  // out = inv >> ((max - x) >> shift_amount). x must not exceed the stored
  // maximum; a violation indicates a schedule bug, not a data condition.
  std::uint8_t en_normalize(int row, std::int8_t x);

  void reset();

  SoftmaxPhase phase() const { return phase_; }
  int rows() const { return rows_; }
  bool initialized(int row) const { return init_[static_cast<std::size_t>(row)] != 0; }
  bool inverted(int row) const { return inverted_[static_cast<std::size_t>(row)] != 0; }
  std::int8_t max_at(int row) const { return max_buf_[static_cast<std::size_t>(row)]; }
  std::uint16_t sum_at(int row) const { return sum_buf_[static_cast<std::size_t>(row)]; }
  std::uint16_t inv_at(int row) const { return inv_buf_[static_cast<std::size_t>(row)]; }
  const SoftmaxConstants& constants() const { return c_; }

 private:
  void check_row(int row, const char* who) const;

  SoftmaxConstants c_;
  int rows_ = 0;
  SoftmaxPhase phase_ = SoftmaxPhase::kDenominatorAccumulation;
  std::vector<std::int8_t> max_buf_;
  std::vector<std::uint16_t> sum_buf_;
  std::vector<std::uint16_t> inv_buf_;
  std::vector<std::uint8_t> init_;
  std::vector<std::uint8_t> inverted_;
};

// Single-pass integer reference: global max up front, then one pass of
// shift-accumulated contributions, plain division for the inverse. Rejects
// rows longer than 2^B - 1 elements; beyond that the streaming path can
// saturate while this reference cannot.
std::vector<std::uint8_t> softmax_row_integer_oracle(
    std::span<const std::int8_t> row, SoftmaxConstants c = SoftmaxConstants{});

// Exact real softmax of the same inputs: out_i = 2^(e'(x_i - max)) / sum.
std::vector<double> softmax_row_float_oracle(
    std::span<const std::int8_t> row, SoftmaxConstants c = SoftmaxConstants{});

// Mean absolute error between integer codes (scale 1/(2^B-1)) and the real
// reference.
double mae(std::span<const std::uint8_t> integer_out, std::span<const double> float_out,
           SoftmaxConstants c = SoftmaxConstants{});

// Convenience: run the streaming state machine over one row split into
// parts of width part_width, returning the normalized outputs.
std::vector<std::uint8_t> streaming_softmax_row(
    std::span<const std::int8_t> row, int part_width,
    SoftmaxConstants c = SoftmaxConstants{},
    SoftmaxState::DaPolicy policy = SoftmaxState::DaPolicy::kStaleRescale);

}  // namespace ita
