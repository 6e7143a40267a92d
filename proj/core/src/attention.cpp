//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/attention.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ita/parallel.hpp"

namespace ita {

void WeightSet::validate(const AttentionDims& dims) const {
  dims.validate();
  if (static_cast<int>(heads.size()) != dims.h)
    throw std::runtime_error("weight set: expected " + std::to_string(dims.h) + " heads");
  for (int h = 0; h < dims.h; ++h) {
    const HeadWeights& hw = heads[static_cast<std::size_t>(h)];
    auto check = [&](const QuantizedMatrix& m, const char* name) {
      if (m.rows != dims.e || m.cols != dims.p)
        throw std::runtime_error("weight set: head" + std::to_string(h) + "." + name +
                                 " must be E x P");
    };
    check(hw.wq, "wq");
    check(hw.wk, "wk");
    check(hw.wv, "wv");
    auto check_bias = [&](const std::vector<std::int8_t>& b, const char* name) {
      if (static_cast<int>(b.size()) != dims.p)
        throw std::runtime_error("weight set: head" + std::to_string(h) + "." + name +
                                 " must have length P");
    };
    check_bias(hw.bq, "bq");
    check_bias(hw.bk, "bk");
    check_bias(hw.bv, "bv");
  }
  if (wo.rows != dims.h * dims.p || wo.cols != dims.e)
    throw std::runtime_error("weight set: wo must be (H*P) x E");
  if (static_cast<int>(bo.size()) != dims.e)
    throw std::runtime_error("weight set: bo must have length E");
  rq_q.validate();
  rq_k.validate();
  rq_v.validate();
  rq_qk.validate();
  rq_av.validate();
  rq_out.validate();
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Shared tile engine. The accumulation order follows the tile walk, which
// cannot change the exact integer result.
template <typename LhsAt>
AccumMatrix tiled_matmul_impl(int rows, int inner, int cols, LhsAt lhs,
                              const QuantizedMatrix& b, std::span<const std::int8_t> bias,
                              const AcceleratorConfig& cfg) {
  cfg.validate();
  if (b.rows != inner)
    throw std::invalid_argument("tiled_matmul: inner dimensions disagree");
  if (!bias.empty() && static_cast<int>(bias.size()) != cols)
    throw std::invalid_argument("tiled_matmul: bias length must match output columns");
  const int limit = overflow_free_inner_limit(cfg);
  if (inner > limit)
    throw std::invalid_argument("tiled_matmul: inner dimension " + std::to_string(inner) +
                                " exceeds the overflow-free bound " + std::to_string(limit));

  AccumMatrix out(rows, cols);
  const int m = cfg.m;
  for (int ti = 0; ti < ceil_div(rows, m); ++ti) {
    for (int tj = 0; tj < ceil_div(cols, m); ++tj) {
      const int r_end = std::min(rows, (ti + 1) * m);
      const int c_end = std::min(cols, (tj + 1) * m);
      // Output stationary: the tile accumulates across every inner chunk
      // before moving on. Edge tiles skip the padded lanes; zero padding
      // contributes nothing.
      for (int tk = 0; tk < ceil_div(inner, m); ++tk) {
        const int k_end = std::min(inner, (tk + 1) * m);
        for (int r = ti * m; r < r_end; ++r) {
          for (int c = tj * m; c < c_end; ++c) {
            std::int64_t acc = out.at(r, c);
            for (int k = tk * m; k < k_end; ++k)
              acc += static_cast<std::int64_t>(lhs(r, k)) * b.at(k, c);
            out.at(r, c) = static_cast<std::int32_t>(acc);
          }
        }
      }
    }
  }
  if (!bias.empty()) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out.at(r, c) += bias[static_cast<std::size_t>(c)];
  }
#ifndef NDEBUG
  const std::int64_t bound = (std::int64_t{1} << (cfg.d - 1)) - 1;
  for (const std::int32_t v : out.values)
    assert(std::abs(static_cast<std::int64_t>(v)) <= bound);
#endif
  return out;
}

}  // namespace

AccumMatrix tiled_matmul(const QuantizedMatrix& a, const QuantizedMatrix& b,
                         std::span<const std::int8_t> bias, const AcceleratorConfig& cfg) {
  return tiled_matmul_impl(
      a.rows, a.cols, b.cols,
      [&a](int r, int k) { return static_cast<int>(a.at(r, k)); }, b, bias, cfg);
}

AccumMatrix tiled_matmul_probs(const ProbMatrix& a, const QuantizedMatrix& b,
                               const AcceleratorConfig& cfg) {
  return tiled_matmul_impl(
      a.rows, a.cols, b.cols,
      [&a](int r, int k) { return static_cast<int>(a.at(r, k)); }, b, {}, cfg);
}

AccumMatrix naive_matmul(const QuantizedMatrix& a, const QuantizedMatrix& b,
                         std::span<const std::int8_t> bias) {
  if (a.cols != b.rows) throw std::invalid_argument("naive_matmul: inner dimensions disagree");
  if (!bias.empty() && static_cast<int>(bias.size()) != b.cols)
    throw std::invalid_argument("naive_matmul: bias length must match output columns");
  AccumMatrix out(a.rows, b.cols);
  for (int r = 0; r < a.rows; ++r) {
    for (int c = 0; c < b.cols; ++c) {
      std::int64_t acc = bias.empty() ? 0 : bias[static_cast<std::size_t>(c)];
      for (int k = 0; k < a.cols; ++k)
        acc += static_cast<std::int64_t>(a.at(r, k)) * b.at(k, c);
      out.at(r, c) = static_cast<std::int32_t>(acc);
    }
  }
  return out;
}

QuantizedMatrix transpose(const QuantizedMatrix& m) {
  QuantizedMatrix t(m.cols, m.rows, m.scale);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
  return t;
}

double softmax_code_scale(int bits) {
  return static_cast<double>(bits) /
         (static_cast<double>(1u << bits) * std::numbers::log2e);
}

namespace {

// Fused row-span pipeline: Q*K^T tiles feed the requantized attention
// scratch and the denominator accumulators; after inversion the scratch is
// re-read with normalization applied on the way into A*V.
void fused_qk_av(const QuantizedMatrix& q, const QuantizedMatrix& kt,
                 const QuantizedMatrix& v, const WeightSet& w,
                 const AcceleratorConfig& cfg, const AttentionDims& dims,
                 const SoftmaxConstants& consts, AccumMatrix& av_acc,
                 QuantizedMatrix& a_scratch, ProbMatrix& probs, SoftmaxTrace& trace) {
  const int s = dims.s;
  const int m = cfg.m;
  const int blocks = ceil_div(s, m);
  for (int bi = 0; bi < blocks; ++bi) {
    const int r0 = bi * m;
    const int rb = std::min(m, s - r0);
    SoftmaxState st(m, consts);
    SoftmaxTrace::Block tb;
    tb.row_begin = r0;
    tb.rows = rb;
    for (int tj = 0; tj < blocks; ++tj) {
      const int c0 = tj * m;
      const int cw = std::min(m, s - c0);
      // Requantize the tile and fold each row slice into the denominators.
      // Only real columns enter; padding stays outside.
      for (int r = 0; r < rb; ++r) {
        for (int c = 0; c < cw; ++c) {
          std::int64_t acc = 0;
          for (int k = 0; k < dims.p; ++k)
            acc += static_cast<std::int64_t>(q.at(r0 + r, k)) * kt.at(k, c0 + c);
          a_scratch.at(r0 + r, c0 + c) =
              requantize(static_cast<std::int32_t>(acc), w.rq_qk);
        }
        const std::int8_t* row_begin = &a_scratch.at(r0 + r, c0);
        st.da_update(r, std::span<const std::int8_t>(row_begin, static_cast<std::size_t>(cw)));
      }
      tb.parts.emplace_back(c0, c0 + cw);
    }
    for (int r = 0; r < rb; ++r) st.di_invert(r);

    // A*V over the span: normalize each scratch element as it streams in.
    for (int pt = 0; pt < ceil_div(dims.p, m); ++pt) {
      const int c_end = std::min(dims.p, (pt + 1) * m);
      for (int tk = 0; tk < blocks; ++tk) {
        const int k_end = std::min(s, (tk + 1) * m);
        for (int r = 0; r < rb; ++r) {
          for (int k = tk * m; k < k_end; ++k) {
            const std::uint8_t pcode = st.en_normalize(r, a_scratch.at(r0 + r, k));
            probs.at(r0 + r, k) = pcode;
            for (int c = pt * m; c < c_end; ++c)
              av_acc.at(r0 + r, c) += static_cast<std::int32_t>(pcode) * v.at(k, c);
          }
        }
      }
    }
    for (int r = 0; r < rb; ++r) {
      tb.final_max.push_back(st.max_at(r));
      tb.final_sum.push_back(st.sum_at(r));
      tb.final_inv.push_back(st.inv_at(r));
    }
    trace.blocks.push_back(std::move(tb));
  }
}

}  // namespace

HeadResult attention_head(const QuantizedMatrix& x, const WeightSet& w, int head,
                          const AcceleratorConfig& cfg, const AttentionDims& dims,
                          bool fused) {
  cfg.validate();
  dims.validate();
  if (cfg.b != 8)
    throw std::invalid_argument("attention_head: the integer pipeline is 8-bit");
  if (head < 0 || head >= dims.h) throw std::invalid_argument("attention_head: bad head index");
  if (x.rows != dims.s || x.cols != dims.e)
    throw std::runtime_error("attention_head: input must be S x E");
  const int limit = overflow_free_inner_limit(cfg);
  if (dims.e > limit || dims.p > limit || dims.s > limit)
    throw std::invalid_argument(
        "attention_head: a contraction dimension exceeds the overflow-free bound " +
        std::to_string(limit));
  const HeadWeights& hw = w.heads[static_cast<std::size_t>(head)];
  const SoftmaxConstants consts = SoftmaxConstants::for_bits(cfg.b);

  const QuantizedMatrix q = requantize_matrix(tiled_matmul(x, hw.wq, hw.bq, cfg), w.rq_q);
  const QuantizedMatrix k = requantize_matrix(tiled_matmul(x, hw.wk, hw.bk, cfg), w.rq_k);
  const QuantizedMatrix v = requantize_matrix(tiled_matmul(x, hw.wv, hw.bv, cfg), w.rq_v);
  const QuantizedMatrix kt = transpose(k);

  HeadResult res;
  res.probs = ProbMatrix(dims.s, dims.s);
  QuantizedMatrix a_scratch(dims.s, dims.s, w.rq_qk.output_scale);
  AccumMatrix av_acc(dims.s, dims.p);

  if (fused) {
    fused_qk_av(q, kt, v, w, cfg, dims, consts, av_acc, a_scratch, res.probs, res.trace);
  } else {
    // Unfused: full Q*K^T, full softmax, then a full A*V pass. The part
    // decomposition (tile columns of width M) is part of the softmax
    // definition and stays the same.
    a_scratch = requantize_matrix(tiled_matmul(q, kt, {}, cfg), w.rq_qk);
    const int blocks = ceil_div(dims.s, cfg.m);
    for (int bi = 0; bi < blocks; ++bi) {
      const int r0 = bi * cfg.m;
      const int rb = std::min(cfg.m, dims.s - r0);
      SoftmaxState st(cfg.m, consts);
      SoftmaxTrace::Block tb;
      tb.row_begin = r0;
      tb.rows = rb;
      for (int tj = 0; tj < blocks; ++tj) {
        const int c0 = tj * cfg.m;
        const int cw = std::min(cfg.m, dims.s - c0);
        for (int r = 0; r < rb; ++r) {
          const std::int8_t* row_begin = &a_scratch.at(r0 + r, c0);
          st.da_update(r, std::span<const std::int8_t>(row_begin, static_cast<std::size_t>(cw)));
        }
        tb.parts.emplace_back(c0, c0 + cw);
      }
      for (int r = 0; r < rb; ++r) st.di_invert(r);
      for (int r = 0; r < rb; ++r) {
        for (int c = 0; c < dims.s; ++c)
          res.probs.at(r0 + r, c) = st.en_normalize(r, a_scratch.at(r0 + r, c));
        tb.final_max.push_back(st.max_at(r));
        tb.final_sum.push_back(st.sum_at(r));
        tb.final_inv.push_back(st.inv_at(r));
      }
      res.trace.blocks.push_back(std::move(tb));
    }
    av_acc = tiled_matmul_probs(res.probs, v, cfg);
  }

  res.output = requantize_matrix(av_acc, w.rq_av);
  return res;
}

AttentionOutput multi_head_attention(const QuantizedMatrix& x, const WeightSet& w,
                                     const AcceleratorConfig& cfg, const AttentionDims& dims,
                                     const AttentionOptions& opt) {
  cfg.validate();
  dims.validate();
  w.validate(dims);
  if (x.rows != dims.s || x.cols != dims.e)
    throw std::runtime_error("multi_head_attention: input must be S x E");

  std::vector<HeadResult> heads(static_cast<std::size_t>(dims.h));
  parallel_for(dims.h, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t h = begin; h < end; ++h)
      heads[static_cast<std::size_t>(h)] =
          attention_head(x, w, static_cast<int>(h), cfg, dims, opt.fused);
  });

  // Head outputs share rq_av, so the concatenation has one scale.
  QuantizedMatrix concat(dims.s, dims.h * dims.p, w.rq_av.output_scale);
  for (int h = 0; h < dims.h; ++h)
    for (int r = 0; r < dims.s; ++r)
      for (int c = 0; c < dims.p; ++c)
        concat.at(r, h * dims.p + c) = heads[static_cast<std::size_t>(h)].output.at(r, c);

  AttentionOutput out;
  out.output = requantize_matrix(tiled_matmul(concat, w.wo, w.bo, cfg), w.rq_out);
  for (auto& h : heads) {
    if (opt.keep_probs) out.probs.push_back(std::move(h.probs));
    out.traces.push_back(std::move(h.trace));
  }
  return out;
}

GoldenAttention float_golden_attention(const QuantizedMatrix& x, const WeightSet& w,
                                       const AttentionDims& dims) {
  dims.validate();
  if (x.rows != dims.s || x.cols != dims.e)
    throw std::runtime_error("float_golden_attention: input must be S x E");

  auto matmul = [](const RealMatrix& a, const RealMatrix& b) {
    RealMatrix out(a.rows, b.cols);
    for (int r = 0; r < a.rows; ++r)
      for (int k = 0; k < a.cols; ++k) {
        const double av = a.at(r, k);
        for (int c = 0; c < b.cols; ++c) out.at(r, c) += av * b.at(k, c);
      }
    return out;
  };
  auto add_bias = [](RealMatrix& m, const std::vector<std::int8_t>& bias, double unit) {
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < m.cols; ++c)
        m.at(r, c) += unit * static_cast<double>(bias[static_cast<std::size_t>(c)]);
  };

  const RealMatrix xf = dequantize(x);
  GoldenAttention res;
  RealMatrix concat(dims.s, dims.h * dims.p);

  for (int h = 0; h < dims.h; ++h) {
    const HeadWeights& hw = w.heads[static_cast<std::size_t>(h)];
    RealMatrix qf = matmul(xf, dequantize(hw.wq));
    RealMatrix kf = matmul(xf, dequantize(hw.wk));
    RealMatrix vf = matmul(xf, dequantize(hw.wv));
    // Bias codes live in accumulator units: one code is worth the product
    // of the operand scales.
    add_bias(qf, hw.bq, x.scale * hw.wq.scale);
    add_bias(kf, hw.bk, x.scale * hw.wk.scale);
    add_bias(vf, hw.bv, x.scale * hw.wv.scale);

    RealMatrix logits(dims.s, dims.s);
    for (int r = 0; r < dims.s; ++r)
      for (int c = 0; c < dims.s; ++c) {
        double acc = 0.0;
        for (int k = 0; k < dims.p; ++k) acc += qf.at(r, k) * kf.at(c, k);
        logits.at(r, c) = acc;
      }

    RealMatrix probs(dims.s, dims.s);
    for (int r = 0; r < dims.s; ++r) {
      double mx = logits.at(r, 0);
      for (int c = 1; c < dims.s; ++c) mx = std::max(mx, logits.at(r, c));
      double sum = 0.0;
      for (int c = 0; c < dims.s; ++c) {
        probs.at(r, c) = std::exp(logits.at(r, c) - mx);
        sum += probs.at(r, c);
      }
      for (int c = 0; c < dims.s; ++c) probs.at(r, c) /= sum;
    }

    const RealMatrix avf = matmul(probs, vf);
    for (int r = 0; r < dims.s; ++r)
      for (int c = 0; c < dims.p; ++c) concat.at(r, h * dims.p + c) = avf.at(r, c);
    res.logits.push_back(std::move(logits));
    res.probs.push_back(std::move(probs));
  }

  res.output = matmul(concat, dequantize(w.wo));
  add_bias(res.output, w.bo, w.rq_av.output_scale * w.wo.scale);
  return res;
}

}  // namespace ita
