//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/naive.hpp"

#include <algorithm>
#include <cstdint>

namespace ita {

namespace {

// Row-major triple loop, int64 accumulation, bias folded in up front.
std::vector<std::int32_t> mul(const std::vector<std::int8_t>& a, int ar, int ac,
                              const std::vector<std::int8_t>& b, int bc,
                              const std::vector<std::int8_t>* bias) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(ar) * bc, 0);
  for (int r = 0; r < ar; ++r) {
    for (int c = 0; c < bc; ++c) {
      std::int64_t acc = bias ? (*bias)[static_cast<std::size_t>(c)] : 0;
      for (int k = 0; k < ac; ++k)
        acc += static_cast<std::int64_t>(a[static_cast<std::size_t>(r) * ac + k]) *
               b[static_cast<std::size_t>(k) * bc + c];
      out[static_cast<std::size_t>(r) * bc + c] = static_cast<std::int32_t>(acc);
    }
  }
  return out;
}

std::vector<std::int8_t> requant_all(const std::vector<std::int32_t>& acc,
                                     const RequantParams& p) {
  std::vector<std::int8_t> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = requantize(acc[i], p);
  return out;
}

// Scalar transcription of the streaming softmax over parts of width `part`:
// running max, risen-max rescale of the stale sum, per-element shifted
// contributions against the current max, saturation at 32767, plain
// division for the inverse, shifted normalization.
void softmax_row(const std::int8_t* row, int len, int part, std::uint8_t* out) {
  int mx = 0;
  std::uint32_t sum = 0;
  bool first = true;
  for (int begin = 0; begin < len; begin += part) {
    const int end = std::min(len, begin + part);
    int pm = row[begin];
    for (int j = begin; j < end; ++j) pm = std::max(pm, static_cast<int>(row[j]));
    if (first) {
      mx = pm;
      first = false;
    } else if (pm > mx) {
      sum >>= (pm - mx) >> 5;
      mx = pm;
    }
    for (int j = begin; j < end; ++j) {
      sum = std::min<std::uint32_t>(sum + (128u >> ((mx - row[j]) >> 5)), 32767u);
    }
  }
  const std::uint32_t inv = 32640u / sum;
  for (int j = 0; j < len; ++j)
    out[j] = static_cast<std::uint8_t>(inv >> ((mx - row[j]) >> 5));
}

std::vector<std::int32_t> mul_u8(const std::vector<std::uint8_t>& a, int ar, int ac,
                                 const std::vector<std::int8_t>& b, int bc) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(ar) * bc, 0);
  for (int r = 0; r < ar; ++r)
    for (int c = 0; c < bc; ++c) {
      std::int64_t acc = 0;
      for (int k = 0; k < ac; ++k)
        acc += static_cast<std::int64_t>(a[static_cast<std::size_t>(r) * ac + k]) *
               b[static_cast<std::size_t>(k) * bc + c];
      out[static_cast<std::size_t>(r) * bc + c] = static_cast<std::int32_t>(acc);
    }
  return out;
}

}  // namespace

QuantizedMatrix naive_reference_attention(const AttentionFixture& f,
                                          const AcceleratorConfig& cfg,
                                          std::vector<ProbMatrix>* probs_out) {
  cfg.validate();
  f.validate();
  const int s = f.dims.s, e = f.dims.e, p = f.dims.p, h = f.dims.h;
  const WeightSet& w = f.weights;

  if (probs_out) probs_out->clear();
  std::vector<std::int8_t> concat(static_cast<std::size_t>(s) * h * p);

  for (int head = 0; head < h; ++head) {
    const HeadWeights& hw = w.heads[static_cast<std::size_t>(head)];
    const auto q = requant_all(mul(f.input.codes, s, e, hw.wq.codes, p, &hw.bq), w.rq_q);
    const auto k = requant_all(mul(f.input.codes, s, e, hw.wk.codes, p, &hw.bk), w.rq_k);
    const auto v = requant_all(mul(f.input.codes, s, e, hw.wv.codes, p, &hw.bv), w.rq_v);

    std::vector<std::int8_t> a(static_cast<std::size_t>(s) * s);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        std::int64_t acc = 0;
        for (int j = 0; j < p; ++j)
          acc += static_cast<std::int64_t>(q[static_cast<std::size_t>(r) * p + j]) *
                 k[static_cast<std::size_t>(c) * p + j];
        a[static_cast<std::size_t>(r) * s + c] =
            requantize(static_cast<std::int32_t>(acc), w.rq_qk);
      }

    std::vector<std::uint8_t> probs(static_cast<std::size_t>(s) * s);
    for (int r = 0; r < s; ++r)
      softmax_row(&a[static_cast<std::size_t>(r) * s], s, cfg.m,
                  &probs[static_cast<std::size_t>(r) * s]);

    const auto av = requant_all(mul_u8(probs, s, s, v, p), w.rq_av);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < p; ++c)
        concat[static_cast<std::size_t>(r) * (h * p) + head * p + c] =
            av[static_cast<std::size_t>(r) * p + c];

    if (probs_out) {
      ProbMatrix pm(s, s);
      pm.values = std::move(probs);
      probs_out->push_back(std::move(pm));
    }
  }

  const auto out_acc = mul(concat, s, h * p, w.wo.codes, e, &w.bo);
  QuantizedMatrix out(s, e, w.rq_out.output_scale);
  out.codes = requant_all(out_acc, w.rq_out);
  return out;
}

}  // namespace ita
