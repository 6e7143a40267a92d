//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "ita/attention.hpp"
#include "ita/harness.hpp"
#include "ita/quant.hpp"
#include "ita/rng.hpp"
#include "ita/softmax.hpp"

namespace {

std::vector<std::int8_t> random_codes(ita::Rng& rng, std::size_t n) {
  std::vector<std::int8_t> v(n);
  for (auto& x : v) x = rng.next_code();
  return v;
}

void BM_StreamingSoftmaxRow(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  ita::Rng rng(7);
  const auto row = random_codes(rng, static_cast<std::size_t>(len));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ita::streaming_softmax_row(row, 64));
  }
  state.SetItemsProcessed(state.iterations() * len);
}
BENCHMARK(BM_StreamingSoftmaxRow)->Arg(64)->Arg(255);

void BM_TiledMatmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ita::Rng rng(11);
  ita::QuantizedMatrix a(n, n, 1.0);
  ita::QuantizedMatrix b(n, n, 1.0);
  a.codes = random_codes(rng, a.codes.size());
  b.codes = random_codes(rng, b.codes.size());
  ita::AcceleratorConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ita::tiled_matmul(a, b, {}, cfg));
  }
  state.SetItemsProcessed(state.iterations() * std::uint64_t(n) * n * n);
}
BENCHMARK(BM_TiledMatmul)->Arg(64)->Arg(128);

void BM_MultiHeadAttention(benchmark::State& state) {
  ita::AcceleratorConfig cfg;
  ita::AttentionDims dims;  // 64x64x64x1
  const ita::AttentionFixture f = ita::make_fixture(7, dims, cfg);
  ita::AttentionOptions opt;
  opt.keep_probs = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ita::multi_head_attention(f.input, f.weights, cfg, f.dims, opt));
  }
  state.SetItemsProcessed(state.iterations() * std::uint64_t(dims.s) * dims.s);
}
BENCHMARK(BM_MultiHeadAttention);

void BM_RequantizeMatrix(benchmark::State& state) {
  const int n = 256;
  ita::Rng rng(13);
  ita::AccumMatrix acc;
  acc.rows = n;
  acc.cols = n;
  acc.values.resize(std::size_t(n) * n);
  for (auto& v : acc.values)
    v = static_cast<std::int32_t>(rng.next_in(-4000000, 4000000));
  const ita::RequantParams rq{37, 11, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ita::requantize_matrix(acc, rq));
  }
  state.SetItemsProcessed(state.iterations() * std::uint64_t(n) * n);
}
BENCHMARK(BM_RequantizeMatrix);

}  // namespace

BENCHMARK_MAIN();
