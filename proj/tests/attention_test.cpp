//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ita/attention.hpp"
#include "ita/harness.hpp"
#include "ita/naive.hpp"
#include "ita/rng.hpp"

using namespace ita;

namespace {

QuantizedMatrix random_codes(Rng& rng, int rows, int cols, double scale = 1.0) {
  QuantizedMatrix m(rows, cols, scale);
  for (auto& c : m.codes) c = rng.next_code();
  return m;
}

}  // namespace

TEST_CASE("tiled matmul equals the plain triple loop") {
  Rng rng(404);
  AcceleratorConfig cfg;
  for (const auto& [r, k, c] : std::vector<std::tuple<int, int, int>>{
           {1, 1, 1}, {64, 64, 64}, {70, 70, 70}, {3, 129, 5}, {65, 2, 63}, {128, 256, 17}}) {
    const QuantizedMatrix a = random_codes(rng, r, k);
    const QuantizedMatrix b = random_codes(rng, k, c);
    std::vector<std::int8_t> bias(static_cast<std::size_t>(c));
    for (auto& v : bias) v = rng.next_code();
    const AccumMatrix tiled = tiled_matmul(a, b, bias, cfg);
    const AccumMatrix plain = naive_matmul(a, b, bias);
    REQUIRE(tiled.rows == r);
    REQUIRE(tiled.cols == c);
    CHECK(tiled.values == plain.values);
    // And without bias.
    CHECK(tiled_matmul(a, b, {}, cfg).values == naive_matmul(a, b, {}).values);
  }
}

TEST_CASE("tiled matmul with small tiles still matches") {
  Rng rng(405);
  AcceleratorConfig cfg;
  cfg.m = 8;
  cfg.n = 4;
  const QuantizedMatrix a = random_codes(rng, 19, 23);
  const QuantizedMatrix b = random_codes(rng, 23, 9);
  CHECK(tiled_matmul(a, b, {}, cfg).values == naive_matmul(a, b, {}).values);
}

TEST_CASE("bias lands exactly once per output element") {
  AcceleratorConfig cfg;
  QuantizedMatrix a(5, 200, 1.0);  // all zero codes, three tile column chunks
  QuantizedMatrix b(200, 3, 1.0);
  std::vector<std::int8_t> bias = {1, -2, 3};
  const AccumMatrix out = tiled_matmul(a, b, bias, cfg);
  for (int i = 0; i < 5; ++i) {
    CHECK(out.at(i, 0) == 1);
    CHECK(out.at(i, 1) == -2);
    CHECK(out.at(i, 2) == 3);
  }
}

TEST_CASE("worst-case accumulator stays inside the 24-bit window") {
  AcceleratorConfig cfg;
  const int inner = overflow_free_inner_limit(cfg);
  REQUIRE(inner == 256);
  QuantizedMatrix a(1, inner, 1.0);
  QuantizedMatrix b(inner, 1, 1.0);
  for (auto& v : a.codes) v = -128;
  for (auto& v : b.codes) v = -128;
  std::vector<std::int8_t> bias = {127};
  const AccumMatrix out = tiled_matmul(a, b, bias, cfg);
  CHECK(out.at(0, 0) == 256 * 128 * 128 + 127);
  CHECK(out.at(0, 0) < (1 << 23));  // strictly inside signed 24-bit range

  QuantizedMatrix wide(1, inner + 1, 1.0);
  QuantizedMatrix tall(inner + 1, 1, 1.0);
  CHECK_THROWS_AS(tiled_matmul(wide, tall, {}, cfg), std::invalid_argument);
}

TEST_CASE("tiled matmul rejects inconsistent shapes") {
  AcceleratorConfig cfg;
  QuantizedMatrix a(2, 3, 1.0);
  QuantizedMatrix b(4, 2, 1.0);
  CHECK_THROWS_AS(tiled_matmul(a, b, {}, cfg), std::invalid_argument);
  QuantizedMatrix ok(3, 2, 1.0);
  std::vector<std::int8_t> bad_bias = {1};
  CHECK_THROWS_AS(tiled_matmul(a, ok, bad_bias, cfg), std::invalid_argument);
}

TEST_CASE("unsigned probability matmul matches a plain loop") {
  Rng rng(406);
  AcceleratorConfig cfg;
  ProbMatrix p(7, 70);
  for (auto& v : p.values) v = static_cast<std::uint8_t>(rng.next_in(0, 255));
  const QuantizedMatrix v = random_codes(rng, 70, 13);
  const AccumMatrix got = tiled_matmul_probs(p, v, cfg);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 13; ++j) {
      std::int64_t want = 0;
      for (int k = 0; k < 70; ++k)
        want += static_cast<std::int64_t>(p.at(i, k)) * v.at(k, j);
      CHECK(got.at(i, j) == want);
    }
}

TEST_CASE("transpose") {
  Rng rng(407);
  const QuantizedMatrix m = random_codes(rng, 5, 9, 0.25);
  const QuantizedMatrix t = transpose(m);
  CHECK(t.rows == 9);
  CHECK(t.cols == 5);
  CHECK(t.scale == 0.25);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 9; ++j) CHECK(t.at(j, i) == m.at(i, j));
}

TEST_CASE("weight set validation names the offending tensor") {
  AttentionDims dims;
  dims.s = 8;
  dims.e = 8;
  dims.p = 8;
  dims.h = 2;
  AcceleratorConfig cfg;
  AttentionFixture f = make_fixture(3, dims, cfg);
  CHECK_NOTHROW(f.weights.validate(dims));

  WeightSet broken = f.weights;
  broken.heads[1].wk = QuantizedMatrix(8, 9, 1.0);
  try {
    broken.validate(dims);
    FAIL("expected a shape error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("head1.wk") != std::string::npos);
  }

  WeightSet short_bias = f.weights;
  short_bias.heads[0].bv.pop_back();
  try {
    short_bias.validate(dims);
    FAIL("expected a shape error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("head0.bv") != std::string::npos);
  }

  WeightSet bad_wo = f.weights;
  bad_wo.wo = QuantizedMatrix(8, 8, 1.0);  // needs 16 x 8
  CHECK_THROWS_AS(bad_wo.validate(dims), std::runtime_error);
}

TEST_CASE("single-key attention concentrates all probability mass") {
  AttentionDims dims;
  dims.s = 1;
  dims.e = 8;
  dims.p = 8;
  dims.h = 1;
  AcceleratorConfig cfg;
  const AttentionFixture f = make_fixture(11, dims, cfg);
  const HeadResult head = attention_head(f.input, f.weights, 0, cfg, dims);
  REQUIRE(head.probs.rows == 1);
  REQUIRE(head.probs.cols == 1);
  CHECK(head.probs.at(0, 0) == 255);
}

TEST_CASE("attention probabilities replay through the standalone softmax") {
  AttentionDims dims;
  dims.s = 70;  // forces a padded tail part of width 6
  dims.e = 24;
  dims.p = 16;
  dims.h = 1;
  AcceleratorConfig cfg;
  const AttentionFixture f = make_fixture(21, dims, cfg);
  const HeadResult head = attention_head(f.input, f.weights, 0, cfg, dims);

  const HeadWeights& hw = f.weights.heads[0];
  const QuantizedMatrix q =
      requantize_matrix(tiled_matmul(f.input, hw.wq, hw.bq, cfg), f.weights.rq_q);
  const QuantizedMatrix k =
      requantize_matrix(tiled_matmul(f.input, hw.wk, hw.bk, cfg), f.weights.rq_k);
  const QuantizedMatrix v =
      requantize_matrix(tiled_matmul(f.input, hw.wv, hw.bv, cfg), f.weights.rq_v);
  const QuantizedMatrix logits =
      requantize_matrix(tiled_matmul(q, transpose(k), {}, cfg), f.weights.rq_qk);

  for (int r = 0; r < dims.s; ++r) {
    const std::span<const std::int8_t> row(logits.codes.data() +
                                               static_cast<std::size_t>(r) * dims.s,
                                           static_cast<std::size_t>(dims.s));
    const auto replay = streaming_softmax_row(row, cfg.m);
    for (int j = 0; j < dims.s; ++j)
      CHECK(head.probs.at(r, j) == replay[static_cast<std::size_t>(j)]);
  }

  // The head output is the normalized probabilities against V.
  const QuantizedMatrix av =
      requantize_matrix(tiled_matmul_probs(head.probs, v, cfg), f.weights.rq_av);
  CHECK(head.output.codes == av.codes);
}

TEST_CASE("fused and unfused attention agree bit for bit") {
  AcceleratorConfig cfg;
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    AttentionDims dims;
    dims.s = 40;
    dims.e = 16;
    dims.p = 24;
    dims.h = 2;
    const AttentionFixture f = make_fixture(seed, dims, cfg);
    for (int head = 0; head < dims.h; ++head) {
      const HeadResult fused = attention_head(f.input, f.weights, head, cfg, dims, true);
      const HeadResult plain = attention_head(f.input, f.weights, head, cfg, dims, false);
      CHECK(fused.output.codes == plain.output.codes);
      CHECK(fused.probs.values == plain.probs.values);
    }
  }
}

TEST_CASE("fused and unfused agree under a small tile size too") {
  AcceleratorConfig cfg;
  cfg.m = 8;
  cfg.n = 4;
  AttentionDims dims;
  dims.s = 21;
  dims.e = 8;
  dims.p = 8;
  dims.h = 1;
  const AttentionFixture f = make_fixture(5, dims, cfg);
  const HeadResult fused = attention_head(f.input, f.weights, 0, cfg, dims, true);
  const HeadResult plain = attention_head(f.input, f.weights, 0, cfg, dims, false);
  CHECK(fused.output.codes == plain.output.codes);
  CHECK(fused.probs.values == plain.probs.values);
}

TEST_CASE("identity output projection reproduces the concatenated heads") {
  AttentionDims dims;
  dims.s = 6;
  dims.e = 16;
  dims.p = 8;
  dims.h = 2;
  AcceleratorConfig cfg;
  AttentionFixture f = make_fixture(13, dims, cfg);

  // Replace the output stage: identity weights, zero bias, unit gain.
  f.weights.wo = QuantizedMatrix(dims.h * dims.p, dims.e, 1.0);
  for (int i = 0; i < dims.h * dims.p; ++i) f.weights.wo.at(i, i) = 1;
  std::fill(f.weights.bo.begin(), f.weights.bo.end(), 0);
  f.weights.rq_out.multiplier = 128;
  f.weights.rq_out.right_shift = 7;
  f.weights.rq_out.output_scale = f.weights.rq_av.output_scale;

  const AttentionOutput out = multi_head_attention(f.input, f.weights, cfg, dims);
  const HeadResult h0 = attention_head(f.input, f.weights, 0, cfg, dims);
  const HeadResult h1 = attention_head(f.input, f.weights, 1, cfg, dims);
  for (int r = 0; r < dims.s; ++r)
    for (int c = 0; c < dims.p; ++c) {
      CHECK(out.output.at(r, c) == h0.output.at(r, c));
      CHECK(out.output.at(r, c + dims.p) == h1.output.at(r, c));
    }
}

TEST_CASE("multi-head attention is deterministic across runs") {
  AttentionDims dims;
  dims.s = 33;
  dims.e = 16;
  dims.p = 16;
  dims.h = 3;
  AcceleratorConfig cfg;
  const AttentionFixture f = make_fixture(29, dims, cfg);
  const AttentionOutput a = multi_head_attention(f.input, f.weights, cfg, dims);
  const AttentionOutput b = multi_head_attention(f.input, f.weights, cfg, dims);
  CHECK(a.output.codes == b.output.codes);
  REQUIRE(a.probs.size() == 3);
  for (int h = 0; h < 3; ++h) CHECK(a.probs[h].values == b.probs[h].values);
  // keep_probs=false drops the matrices but not the result.
  AttentionOptions opt;
  opt.keep_probs = false;
  const AttentionOutput c = multi_head_attention(f.input, f.weights, cfg, dims, opt);
  CHECK(c.output.codes == a.output.codes);
  CHECK(c.probs.empty());
}

TEST_CASE("head and output-row permutation leaves the result unchanged") {
  AttentionDims dims;
  dims.s = 12;
  dims.e = 8;
  dims.p = 4;
  dims.h = 3;
  AcceleratorConfig cfg;
  const AttentionFixture f = make_fixture(31, dims, cfg);
  const AttentionOutput base = multi_head_attention(f.input, f.weights, cfg, dims);

  // Rotate the heads and the matching P-row blocks of wo.
  AttentionFixture g = f;
  const int perm[3] = {2, 0, 1};
  for (int h = 0; h < 3; ++h) {
    g.weights.heads[h] = f.weights.heads[perm[h]];
    for (int r = 0; r < dims.p; ++r)
      for (int c = 0; c < dims.e; ++c)
        g.weights.wo.at(h * dims.p + r, c) = f.weights.wo.at(perm[h] * dims.p + r, c);
  }
  const AttentionOutput rotated = multi_head_attention(g.input, g.weights, cfg, dims);
  CHECK(rotated.output.codes == base.output.codes);
}

TEST_CASE("attention input validation") {
  AttentionDims dims;
  dims.s = 8;
  dims.e = 8;
  dims.p = 8;
  dims.h = 1;
  AcceleratorConfig cfg;
  const AttentionFixture f = make_fixture(37, dims, cfg);

  AcceleratorConfig four_bit = cfg;
  four_bit.b = 4;
  CHECK_THROWS_AS(attention_head(f.input, f.weights, 0, four_bit, dims),
                  std::invalid_argument);
  CHECK_THROWS_AS(attention_head(f.input, f.weights, 1, cfg, dims), std::invalid_argument);
  CHECK_THROWS_AS(attention_head(f.input, f.weights, -1, cfg, dims), std::invalid_argument);

  QuantizedMatrix wrong(7, 8, f.input.scale);
  CHECK_THROWS_AS(attention_head(wrong, f.weights, 0, cfg, dims), std::runtime_error);

  // Sequence lengths beyond the overflow-free window are refused outright.
  AttentionDims big = dims;
  big.s = 300;
  QuantizedMatrix x300(300, 8, f.input.scale);
  CHECK_THROWS_AS(attention_head(x300, f.weights, 0, cfg, big), std::invalid_argument);
}

TEST_CASE("golden model probabilities are uniform for constant logits") {
  AttentionDims dims;
  dims.s = 16;
  dims.e = 8;
  dims.p = 8;
  dims.h = 1;
  AcceleratorConfig cfg;
  AttentionFixture f = make_fixture(41, dims, cfg);
  // Zero input makes every logit equal (only biases survive, identical per row).
  std::fill(f.input.codes.begin(), f.input.codes.end(), 0);
  const GoldenAttention g = float_golden_attention(f.input, f.weights, dims);
  REQUIRE(g.probs.size() == 1);
  for (int r = 0; r < dims.s; ++r)
    for (int c = 0; c < dims.s; ++c)
      CHECK(g.probs[0].at(r, c) == doctest::Approx(1.0 / dims.s).epsilon(1e-12));
}

TEST_CASE("golden model rows always sum to one") {
  AttentionDims dims;
  dims.s = 24;
  dims.e = 16;
  dims.p = 8;
  dims.h = 2;
  AcceleratorConfig cfg;
  const AttentionFixture f = make_fixture(43, dims, cfg);
  const GoldenAttention g = float_golden_attention(f.input, f.weights, dims);
  REQUIRE(g.probs.size() == 2);
  REQUIRE(g.output.rows == dims.s);
  REQUIRE(g.output.cols == dims.e);
  for (const RealMatrix& p : g.probs)
    for (int r = 0; r < dims.s; ++r) {
      double total = 0.0;
      for (int c = 0; c < dims.s; ++c) {
        CHECK(p.at(r, c) >= 0.0);
        total += p.at(r, c);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("the tiled pipeline and the plain-loop reference agree exactly") {
  AcceleratorConfig cfg;
  for (const auto& [s, e, p, h, seed] :
       std::vector<std::tuple<int, int, int, int, std::uint64_t>>{
           {64, 64, 64, 1, 7}, {24, 16, 8, 2, 8}, {70, 24, 16, 1, 9}, {1, 8, 8, 3, 10}}) {
    AttentionDims dims;
    dims.s = s;
    dims.e = e;
    dims.p = p;
    dims.h = h;
    const AttentionFixture f = make_fixture(seed, dims, cfg);
    std::vector<ProbMatrix> naive_probs;
    const QuantizedMatrix reference = naive_reference_attention(f, cfg, &naive_probs);
    const AttentionOutput pipeline = multi_head_attention(f.input, f.weights, cfg, dims);
    CHECK(pipeline.output.codes == reference.codes);
    CHECK(pipeline.output.scale == reference.scale);
    REQUIRE(naive_probs.size() == static_cast<std::size_t>(h));
    for (int head = 0; head < h; ++head)
      CHECK(pipeline.probs[static_cast<std::size_t>(head)].values ==
            naive_probs[static_cast<std::size_t>(head)].values);
  }
}

TEST_CASE("code-to-logit scale identity") {
  // epsilon * log2(e) * 2^B = B, the exponent budget of the shift form.
  const double eps = softmax_code_scale(8);
  CHECK(eps * std::log2(std::exp(1.0)) * 256.0 == doctest::Approx(8.0).epsilon(1e-12));
}
