//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
// Exact-rational evaluation of the single-pass shifted-softmax formula,
// written from the formula itself and kept deliberately independent of the
// library implementation so the two can disagree.
#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace refmath {

struct Fraction {
  long long num = 0;
  long long den = 1;

  static Fraction of(long long n, long long d) {
    if (d <= 0) throw std::invalid_argument("fraction: positive denominators only");
    const long long g = std::gcd(n, d);
    return Fraction{g ? n / g : n, g ? d / g : d};
  }

  Fraction plus(const Fraction& o) const {
    return of(num * o.den + o.num * den, den * o.den);
  }

  long long floor_value() const {
    // den > 0 by construction; C++ division truncates toward zero.
    const long long q = num / den;
    return (num % den != 0 && num < 0) ? q - 1 : q;
  }
};

// B = 8 constants: contributions 2^(B-1) / 2^((max - x) >> (B - log2 B)),
// denominator inverse floor((2^B - 1) * 2^(B-1) / sigma), outputs shifted
// down by the same per-element amount.
inline std::vector<unsigned> shifted_softmax(const std::vector<int>& row) {
  if (row.empty()) throw std::invalid_argument("shifted_softmax: empty row");
  int mx = row[0];
  for (const int x : row) mx = std::max(mx, x);

  Fraction sigma{0, 1};
  for (const int x : row) {
    const int s = (mx - x) >> 5;
    sigma = sigma.plus(Fraction::of(128, 1LL << s));
  }
  const long long inv = Fraction::of(255 * 128, sigma.floor_value()).floor_value();

  std::vector<unsigned> out;
  out.reserve(row.size());
  for (const int x : row) {
    const int s = (mx - x) >> 5;
    out.push_back(static_cast<unsigned>(Fraction::of(inv, 1LL << s).floor_value()));
  }
  return out;
}

}  // namespace refmath
