//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ita {

SoftmaxConstants SoftmaxConstants::for_bits(int b) {
  if (b != 4 && b != 8)
    throw std::invalid_argument("SoftmaxConstants: bits must be a power of two in [4, 8]");
  SoftmaxConstants c;
  c.bits = b;
  int log2b = 0;
  while ((1 << log2b) < b) ++log2b;
  c.shift_amount = b - log2b;
  c.unit = 1 << (b - 1);
  c.sum_max = (1u << (2 * b - 1)) - 1;
  c.inv_dividend = static_cast<std::uint32_t>(((1u << b) - 1) * c.unit);
  c.epsilon_prime = static_cast<double>(b) / static_cast<double>(1u << b);
  return c;
}

DivResult serial_divide_u16(std::uint16_t dividend, std::uint16_t divisor) {
  if (divisor == 0) throw std::logic_error("serial_divide_u16: divide by zero");
  std::uint32_t rem = 0;
  std::uint16_t q = 0;
  for (int bit = 15; bit >= 0; --bit) {
    rem = (rem << 1) | ((dividend >> bit) & 1u);
    if (rem >= divisor) {
      rem -= divisor;
      q = static_cast<std::uint16_t>(q | (1u << bit));
    }
  }
  return DivResult{q, 16};
}

SoftmaxState::SoftmaxState(int rows, SoftmaxConstants c) : c_(c), rows_(rows) {
  if (rows < 1) throw std::invalid_argument("SoftmaxState: rows must be positive");
  max_buf_.assign(static_cast<std::size_t>(rows), 0);
  sum_buf_.assign(static_cast<std::size_t>(rows), 0);
  inv_buf_.assign(static_cast<std::size_t>(rows), 0);
  init_.assign(static_cast<std::size_t>(rows), 0);
  inverted_.assign(static_cast<std::size_t>(rows), 0);
}

void SoftmaxState::check_row(int row, const char* who) const {
  if (row < 0 || row >= rows_)
    throw std::invalid_argument(std::string(who) + ": row out of range");
}

void SoftmaxState::da_update(int row, std::span<const std::int8_t> part, DaPolicy policy) {
  check_row(row, "da_update");
  if (phase_ != SoftmaxPhase::kDenominatorAccumulation)
    throw std::invalid_argument("da_update: accumulation phase is over");
  if (part.empty()) throw std::invalid_argument("da_update: empty part");

  int m_c = part[0];
  for (const std::int8_t x : part) m_c = std::max(m_c, static_cast<int>(x));

  const std::size_t i = static_cast<std::size_t>(row);
  const bool fresh = init_[i] == 0;
  const int m_p = fresh ? m_c : max_buf_[i];
  const int m = std::max(m_p, m_c);

  // Stale accumulator first: a risen maximum devalues what has been summed
  // so far by the shifted max difference.
  std::uint32_t acc = fresh ? 0u : sum_buf_[i];
  if (m > m_p) acc >>= (m - m_p) >> c_.shift_amount;

  if (policy == DaPolicy::kStaleRescale) {
    // Incoming elements accumulate against the merged maximum. The max
    // element contributes a full unit and (m - x) <= 255 keeps every
    // contribution nonzero, so a nonempty part always adds at least 1.
    for (const std::int8_t x : part) {
      const int s = (m - x) >> c_.shift_amount;
      acc = std::min<std::uint32_t>(acc + (static_cast<std::uint32_t>(c_.unit) >> s),
                                    c_.sum_max);
    }
  } else {
    // Fault injection: sum against the part-local maximum and rescale the
    // lump. The compounded floors diverge from the single-pass form.
    std::uint32_t local = 0;
    for (const std::int8_t x : part) {
      const int s = (m_c - x) >> c_.shift_amount;
      local = std::min<std::uint32_t>(local + (static_cast<std::uint32_t>(c_.unit) >> s),
                                      c_.sum_max);
    }
    acc = std::min<std::uint32_t>(acc + (local >> ((m - m_c) >> c_.shift_amount)),
                                  c_.sum_max);
  }

  max_buf_[i] = static_cast<std::int8_t>(m);
  sum_buf_[i] = static_cast<std::uint16_t>(std::min(acc, c_.sum_max));
  init_[i] = 1;
}

void SoftmaxState::di_invert(int row) {
  check_row(row, "di_invert");
  if (phase_ == SoftmaxPhase::kElementNormalization)
    throw std::invalid_argument("di_invert: normalization already started");
  const std::size_t i = static_cast<std::size_t>(row);
  if (!init_[i]) throw std::invalid_argument("di_invert: row has not accumulated");
  if (sum_buf_[i] == 0) throw std::logic_error("di_invert: zero denominator");
  inv_buf_[i] = serial_divide_u16(static_cast<std::uint16_t>(c_.inv_dividend),
                                  sum_buf_[i]).quotient;
  inverted_[i] = 1;
  phase_ = SoftmaxPhase::kDenominatorInversion;
}

std::uint8_t SoftmaxState::en_normalize(int row, std::int8_t x) {
  check_row(row, "en_normalize");
  const std::size_t i = static_cast<std::size_t>(row);
  if (!inverted_[i]) throw std::invalid_argument("en_normalize: row not inverted");
  if (x > max_buf_[i])
    throw std::logic_error("en_normalize: element above stored maximum");
  phase_ = SoftmaxPhase::kElementNormalization;
  const int s = (static_cast<int>(max_buf_[i]) - static_cast<int>(x)) >> c_.shift_amount;
  return static_cast<std::uint8_t>(inv_buf_[i] >> s);
}

void SoftmaxState::reset() {
  phase_ = SoftmaxPhase::kDenominatorAccumulation;
  std::fill(max_buf_.begin(), max_buf_.end(), 0);
  std::fill(sum_buf_.begin(), sum_buf_.end(), 0);
  std::fill(inv_buf_.begin(), inv_buf_.end(), 0);
  std::fill(init_.begin(), init_.end(), 0);
  std::fill(inverted_.begin(), inverted_.end(), 0);
}

std::vector<std::uint8_t> softmax_row_integer_oracle(std::span<const std::int8_t> row,
                                                     SoftmaxConstants c) {
  if (row.empty()) throw std::invalid_argument("integer oracle: empty row");
  if (row.size() > static_cast<std::size_t>((1u << c.bits) - 1))
    throw std::invalid_argument("integer oracle: row longer than 2^B - 1 elements");
  int mx = row[0];
  for (const std::int8_t x : row) mx = std::max(mx, static_cast<int>(x));
  std::uint32_t sum = 0;
  for (const std::int8_t x : row)
    sum += static_cast<std::uint32_t>(c.unit) >> ((mx - x) >> c.shift_amount);
  const std::uint32_t inv = c.inv_dividend / sum;
  std::vector<std::uint8_t> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i)
    out[i] = static_cast<std::uint8_t>(inv >> ((mx - row[i]) >> c.shift_amount));
  return out;
}

std::vector<double> softmax_row_float_oracle(std::span<const std::int8_t> row,
                                             SoftmaxConstants c) {
  if (row.empty()) throw std::invalid_argument("float oracle: empty row");
  int mx = row[0];
  for (const std::int8_t x : row) mx = std::max(mx, static_cast<int>(x));
  std::vector<double> out(row.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = std::exp2(c.epsilon_prime * (static_cast<int>(row[i]) - mx));
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double mae(std::span<const std::uint8_t> integer_out, std::span<const double> float_out,
           SoftmaxConstants c) {
  if (integer_out.size() != float_out.size())
    throw std::invalid_argument("mae: length mismatch");
  if (integer_out.empty()) throw std::invalid_argument("mae: empty input");
  const double denom = static_cast<double>((1u << c.bits) - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < integer_out.size(); ++i)
    acc += std::abs(static_cast<double>(integer_out[i]) / denom - float_out[i]);
  return acc / static_cast<double>(integer_out.size());
}

std::vector<std::uint8_t> streaming_softmax_row(std::span<const std::int8_t> row,
                                                int part_width, SoftmaxConstants c,
                                                SoftmaxState::DaPolicy policy) {
  if (row.empty()) throw std::invalid_argument("streaming_softmax_row: empty row");
  if (part_width < 1) throw std::invalid_argument("streaming_softmax_row: bad part width");
  SoftmaxState st(1, c);
  for (std::size_t begin = 0; begin < row.size(); begin += part_width) {
    const std::size_t len = std::min<std::size_t>(part_width, row.size() - begin);
    st.da_update(0, row.subspan(begin, len), policy);
  }
  st.di_invert(0);
  std::vector<std::uint8_t> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = st.en_normalize(0, row[i]);
  return out;
}

}  // namespace ita
