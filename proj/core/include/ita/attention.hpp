//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ita/config.hpp"
#include "ita/quant.hpp"
#include "ita/softmax.hpp"

namespace ita {

// Per-head projection weights (E x P) and 8-bit biases (length P). Biases
// add into the accumulator before requantization, so their unit is the
// product of the operand scales.
struct HeadWeights {
  QuantizedMatrix wq, wk, wv;
  std::vector<std::int8_t> bq, bk, bv;
};

struct WeightSet {
  std::vector<HeadWeights> heads;
  QuantizedMatrix wo;            // (H*P) x E, shared across heads
  std::vector<std::int8_t> bo;   // length E
  RequantParams rq_q, rq_k, rq_v, rq_qk, rq_av, rq_out;

  // Shape consistency against dims; throws naming the offending tensor.
  void validate(const AttentionDims& dims) const;
};

// Column spans fed to the streaming softmax, one list per attention row
// span, plus the final per-row state for inspection.
struct SoftmaxTrace {
  struct Block {
    int row_begin = 0;
    int rows = 0;
    std::vector<std::pair<int, int>> parts;  // [begin, end) column spans
    std::vector<std::int8_t> final_max;
    std::vector<std::uint16_t> final_sum;
    std::vector<std::uint16_t> final_inv;
  };
  std::vector<Block> blocks;
};

struct HeadResult {
  QuantizedMatrix output;  // S x P
  ProbMatrix probs;        // S x S, scale 1/(2^B - 1)
  SoftmaxTrace trace;
};

struct AttentionOptions {
  bool fused = true;       // interleave Q*K^T, softmax phases and A*V per row span
  bool keep_probs = true;  // retain the S x S probability matrices
};

struct AttentionOutput {
  QuantizedMatrix output;  // S x E
  std::vector<ProbMatrix> probs;    // per head, empty unless keep_probs
  std::vector<SoftmaxTrace> traces; // per head
};

// Exact integer matmul over M x M tiles with zero padding at the edges and
// the inner dimension iterated innermost (output-stationary accumulation).
// bias may be empty or of length b.cols. The inner dimension must not
// exceed overflow_free_inner_limit(cfg).
AccumMatrix tiled_matmul(const QuantizedMatrix& a, const QuantizedMatrix& b,
                         std::span<const std::int8_t> bias, const AcceleratorConfig& cfg);

// Same engine with unsigned probability codes on the left.
AccumMatrix tiled_matmul_probs(const ProbMatrix& a, const QuantizedMatrix& b,
                               const AcceleratorConfig& cfg);

// Reference triple loop, no tiling; used by equivalence checks.
AccumMatrix naive_matmul(const QuantizedMatrix& a, const QuantizedMatrix& b,
                         std::span<const std::int8_t> bias);

QuantizedMatrix transpose(const QuantizedMatrix& m);

// One attention head: projections, Q*K^T with streaming denominator
// accumulation per row span, inversion, then A*V with normalization on the
// fly. fused=false computes the same values through separate full passes.
HeadResult attention_head(const QuantizedMatrix& x, const WeightSet& w, int head,
                          const AcceleratorConfig& cfg, const AttentionDims& dims,
                          bool fused = true);

AttentionOutput multi_head_attention(const QuantizedMatrix& x, const WeightSet& w,
                                     const AcceleratorConfig& cfg, const AttentionDims& dims,
                                     const AttentionOptions& opt = AttentionOptions{});

// Real-arithmetic reference with exact base-e softmax over the dequantized
// weights. Logits are scaled by epsilon = B / (2^B * log2(e)) relative to
// the integer codes entering the shift softmax.
struct GoldenAttention {
  RealMatrix output;               // S x E
  std::vector<RealMatrix> probs;   // per head, S x S
  std::vector<RealMatrix> logits;  // per head, S x S, pre-softmax
};

GoldenAttention float_golden_attention(const QuantizedMatrix& x, const WeightSet& w,
                                       const AttentionDims& dims);

// Code-to-logit scale that makes the shift softmax approximate base-e
// softmax: B / (2^B * log2(e)).
double softmax_code_scale(int bits);

}  // namespace ita
