//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

namespace ita {

inline constexpr int kCodeMin = -128;
inline constexpr int kCodeMax = 127;

struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major

  RealMatrix() = default;
  RealMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Symmetric 8-bit codes: value = scale * code, zero point is always 0.
struct QuantizedMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int8_t> codes;  // row-major
  double scale = 1.0;

  QuantizedMatrix() = default;
  QuantizedMatrix(int r, int c, double s)
      : rows(r), cols(c), codes(static_cast<std::size_t>(r) * c, 0), scale(s) {}
  std::int8_t& at(int r, int c) { return codes[static_cast<std::size_t>(r) * cols + c]; }
  std::int8_t at(int r, int c) const { return codes[static_cast<std::size_t>(r) * cols + c]; }
};

// D-bit accumulator values held in int32 storage.
struct AccumMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> values;  // row-major

  AccumMatrix() = default;
  AccumMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0) {}
  std::int32_t& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::int32_t at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Fixed-point accumulator-to-code rescale: code = acc * multiplier >> right_shift,
// rounded half away from zero, then clamped to the 8-bit code range.
struct RequantParams {
  std::uint32_t multiplier = 1;  // 1..255
  int right_shift = 0;           // 0..31
  double output_scale = 1.0;     // real value of one output code

  void validate() const;
};

// Nearest integer, ties away from zero.
int round_half_away(double v);

// codes = clamp(round(values / scale)). Rejects non-finite inputs and
// non-positive scales.
QuantizedMatrix quantize(const RealMatrix& m, double scale);

RealMatrix dequantize(const QuantizedMatrix& m);

std::int8_t requantize(std::int32_t acc, const RequantParams& p);

QuantizedMatrix requantize_matrix(const AccumMatrix& acc, const RequantParams& p);

// Closest multiplier/2^shift pair to `ratio` (the accumulator-to-output gain),
// with the output scale recomputed from the pair actually chosen so that
// dequantization stays exact. lhs_scale * rhs_scale / ratio gives that scale.
RequantParams choose_requant_params(double ratio, double lhs_scale, double rhs_scale);

}  // namespace ita
