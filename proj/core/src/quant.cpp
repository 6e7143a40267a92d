//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ita {

void RequantParams::validate() const {
  if (multiplier < 1 || multiplier > 255)
    throw std::invalid_argument("RequantParams: multiplier must be in [1, 255]");
  if (right_shift < 0 || right_shift > 31)
    throw std::invalid_argument("RequantParams: right_shift must be in [0, 31]");
  if (!(output_scale > 0.0) || !std::isfinite(output_scale))
    throw std::invalid_argument("RequantParams: output_scale must be positive and finite");
}

int round_half_away(double v) {
  return v >= 0.0 ? static_cast<int>(std::floor(v + 0.5))
                  : -static_cast<int>(std::floor(-v + 0.5));
}

QuantizedMatrix quantize(const RealMatrix& m, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("quantize: scale must be positive and finite");
  QuantizedMatrix q(m.rows, m.cols, scale);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double v = m.values[i];
    if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite input value");
    const double r = v / scale;
    // Large magnitudes clamp before the int conversion could overflow.
    int code;
    if (r >= kCodeMax)
      code = kCodeMax;
    else if (r <= kCodeMin)
      code = kCodeMin;
    else
      code = std::clamp(round_half_away(r), kCodeMin, kCodeMax);
    q.codes[i] = static_cast<std::int8_t>(code);
  }
  return q;
}

RealMatrix dequantize(const QuantizedMatrix& m) {
  RealMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.codes.size(); ++i)
    out.values[i] = m.scale * static_cast<double>(m.codes[i]);
  return out;
}

std::int8_t requantize(std::int32_t acc, const RequantParams& p) {
  p.validate();
  const std::int64_t prod = static_cast<std::int64_t>(acc) * p.multiplier;
  std::int64_t rounded;
  if (p.right_shift == 0) {
    rounded = prod;
  } else {
    // Floor shift with a sign-adjusted rounding addend gives
    // round-half-away-from-zero: +2^(s-1) for non-negative products,
    // 2^(s-1)-1 for negative ones.
    const std::int64_t half = std::int64_t{1} << (p.right_shift - 1);
    rounded = (prod + (prod >= 0 ? half : half - 1)) >> p.right_shift;
  }
  return static_cast<std::int8_t>(
      std::clamp<std::int64_t>(rounded, kCodeMin, kCodeMax));
}

QuantizedMatrix requantize_matrix(const AccumMatrix& acc, const RequantParams& p) {
  p.validate();
  QuantizedMatrix out(acc.rows, acc.cols, p.output_scale);
  for (std::size_t i = 0; i < acc.values.size(); ++i)
    out.codes[i] = requantize(acc.values[i], p);
  return out;
}

RequantParams choose_requant_params(double ratio, double lhs_scale, double rhs_scale) {
  if (!(ratio > 0.0) || !std::isfinite(ratio))
    throw std::invalid_argument("choose_requant_params: ratio must be positive and finite");
  RequantParams p;
  p.right_shift = 0;
  p.multiplier = 255;
  for (int shift = 31; shift >= 0; --shift) {
    const double scaled = std::ldexp(ratio, shift);
    const long m = std::lround(scaled);
    if (m <= 255) {
      p.right_shift = shift;
      p.multiplier = static_cast<std::uint32_t>(std::max(1L, m));
      break;
    }
  }
  p.output_scale = lhs_scale * rhs_scale *
                   std::ldexp(1.0, p.right_shift) / static_cast<double>(p.multiplier);
  p.validate();
  return p;
}

}  // namespace ita
