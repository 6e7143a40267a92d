//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>

namespace ita {

// Hardware shape. N parallel dot-product units of width M, D-bit
// accumulators, B-bit activation codes.
struct AcceleratorConfig {
  int n = 16;
  int m = 64;
  int d = 24;
  int b = 8;
  double freq_hz = 500e6;
  int divider_latency_cycles = 16;
  int divider_count = 2;
  // Output FIFO model: drain rate 0 disables it (the FIFO is then assumed
  // deep enough to never stall).
  int fifo_depth_bytes = 0;
  double fifo_drain_bytes_per_cycle = 0.0;

  void validate() const;
};

// Sequence length S, embedding width E, projection width P, heads H.
struct AttentionDims {
  int s = 64;
  int e = 64;
  int p = 64;
  int h = 1;

  void validate() const;
};

// Largest inner dimension whose dot products provably fit the D-bit
// accumulator together with an 8-bit bias (2^(D-2B) elements).
int overflow_free_inner_limit(const AcceleratorConfig& cfg);

}  // namespace ita
