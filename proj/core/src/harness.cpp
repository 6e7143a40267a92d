//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ita/naive.hpp"
#include "ita/parallel.hpp"
#include "ita/softmax.hpp"

namespace ita {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

double parse_number(const std::string& text, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("distribution: bad ") + what + " '" + text + "'");
  }
}

}  // namespace

InputDistribution InputDistribution::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::vector<std::string> args;
  if (colon != std::string::npos) {
    std::string rest = text.substr(colon + 1);
    std::size_t pos = 0;
    while (true) {
      const auto comma = rest.find(',', pos);
      args.push_back(rest.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  InputDistribution d;
  if (name == "uniform") {
    if (!args.empty()) throw std::invalid_argument("distribution: uniform takes no parameters");
    d.kind = DistKind::kUniform;
  } else if (name == "gaussian") {
    d.kind = DistKind::kGaussian;
    if (!args.empty()) {
      if (args.size() != 2)
        throw std::invalid_argument("distribution: gaussian wants MEAN,SIGMA");
      d.mean = parse_number(args[0], "mean");
      d.sigma = parse_number(args[1], "sigma");
    }
  } else if (name == "peaked") {
    d.kind = DistKind::kPeaked;
    if (args.size() != 1) throw std::invalid_argument("distribution: peaked wants FRACTION");
    d.fraction = parse_number(args[0], "fraction");
  } else if (name == "constant") {
    d.kind = DistKind::kConstant;
    if (args.size() != 1) throw std::invalid_argument("distribution: constant wants VALUE");
    const double v = parse_number(args[0], "value");
    d.constant_value = static_cast<int>(v);
    if (static_cast<double>(d.constant_value) != v)
      throw std::invalid_argument("distribution: constant value must be an integer");
  } else {
    throw std::invalid_argument("distribution: unknown kind '" + name + "'");
  }
  d.validate();
  return d;
}

std::string InputDistribution::describe() const {
  char buf[64];
  switch (kind) {
    case DistKind::kUniform:
      return "uniform";
    case DistKind::kGaussian:
      std::snprintf(buf, sizeof(buf), "gaussian:%g,%g", mean, sigma);
      return buf;
    case DistKind::kPeaked:
      std::snprintf(buf, sizeof(buf), "peaked:%g", fraction);
      return buf;
    case DistKind::kConstant:
      std::snprintf(buf, sizeof(buf), "constant:%d", constant_value);
      return buf;
  }
  return "";
}

void InputDistribution::validate() const {
  switch (kind) {
    case DistKind::kUniform:
      break;
    case DistKind::kGaussian:
      if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mean))
        throw std::invalid_argument("distribution: sigma must be positive and finite");
      break;
    case DistKind::kPeaked:
      if (!(fraction > 0.0) || !(fraction <= 1.0))
        throw std::invalid_argument("distribution: fraction must be in (0, 1]");
      break;
    case DistKind::kConstant:
      if (constant_value < kCodeMin || constant_value > kCodeMax)
        throw std::invalid_argument("distribution: constant value outside the code range");
      break;
  }
}

void ExperimentSpec::validate() const {
  dims.validate();
  cfg.validate();
  dist.validate();
  if (repetitions < 1) throw std::invalid_argument("experiment: repetitions must be >= 1");
}

void ErrorReport::merge(const ErrorReport& other) {
  const std::uint64_t total = samples + other.samples;
  if (total == 0) return;
  softmax_mae = (softmax_mae * static_cast<double>(samples) +
                 other.softmax_mae * static_cast<double>(other.samples)) /
                static_cast<double>(total);
  end_to_end_output_mae = (end_to_end_output_mae * static_cast<double>(samples) +
                           other.end_to_end_output_mae * static_cast<double>(other.samples)) /
                          static_cast<double>(total);
  softmax_max_abs_err = std::max(softmax_max_abs_err, other.softmax_max_abs_err);
  for (std::size_t i = 0; i < histogram.size(); ++i) histogram[i] += other.histogram[i];
  samples = total;
}

int ErrorReport::bucket_of(double abs_err) {
  static constexpr double edges[] = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  int b = 0;
  for (const double e : edges) {
    if (abs_err < e) return b;
    ++b;
  }
  return b;
}

std::vector<std::int8_t> generate_row(Rng& rng, int len, const InputDistribution& dist) {
  dist.validate();
  if (len < 1) throw std::invalid_argument("generate_row: length must be positive");
  std::vector<std::int8_t> row(static_cast<std::size_t>(len));
  for (auto& code : row) {
    switch (dist.kind) {
      case DistKind::kUniform:
        code = rng.next_code();
        break;
      case DistKind::kGaussian: {
        const double v = dist.mean + dist.sigma * rng.next_gaussian();
        code = static_cast<std::int8_t>(
            std::clamp(round_half_away(std::clamp(v, -1e6, 1e6)), kCodeMin, kCodeMax));
        break;
      }
      case DistKind::kPeaked: {
        // Constant draw count per element keeps the stream split-stable.
        const double u = rng.next_double();
        const std::uint64_t v = rng.next_u64();
        if (u < dist.fraction)
          code = static_cast<std::int8_t>(127 - static_cast<int>(v % 8));
        else
          code = static_cast<std::int8_t>(-128 + static_cast<int>(v % 129));
        break;
      }
      case DistKind::kConstant:
        code = static_cast<std::int8_t>(dist.constant_value);
        break;
    }
  }
  return row;
}

ErrorReport run_softmax_sweep(const ExperimentSpec& spec) {
  spec.validate();
  const int rows = spec.repetitions;
  const int len = spec.dims.s;
  const SoftmaxConstants consts = SoftmaxConstants::for_bits(spec.cfg.b);
  const double denom = static_cast<double>((1u << consts.bits) - 1);

  // One partial per row, folded in row order afterwards: the result cannot
  // depend on how rows were scheduled across threads.
  std::vector<ErrorReport> partials(static_cast<std::size_t>(rows));
  const Rng root(spec.seed);
  parallel_for(rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r) {
      Rng rng = root.fork(static_cast<std::uint64_t>(r));
      const auto row = generate_row(rng, len, spec.dist);
      const auto codes = streaming_softmax_row(row, spec.cfg.m, consts);
      const auto ref = softmax_row_float_oracle(row, consts);
      ErrorReport& p = partials[static_cast<std::size_t>(r)];
      double sum_abs = 0.0;
      for (std::size_t i = 0; i < codes.size(); ++i) {
        const double err = std::abs(static_cast<double>(codes[i]) / denom - ref[i]);
        sum_abs += err;
        p.softmax_max_abs_err = std::max(p.softmax_max_abs_err, err);
        ++p.histogram[static_cast<std::size_t>(ErrorReport::bucket_of(err))];
      }
      p.samples = codes.size();
      p.softmax_mae = sum_abs / static_cast<double>(codes.size());
    }
  });

  ErrorReport out;
  for (const ErrorReport& p : partials) out.merge(p);
  return out;
}

namespace {

std::uint64_t case_seed(std::uint64_t suite_seed, int property_index, int case_index) {
  Rng r(suite_seed + kGamma * static_cast<std::uint64_t>(property_index + 1));
  return r.fork(static_cast<std::uint64_t>(case_index)).next_u64();
}

// Shared helpers for the property bodies. Each body is a pure function of
// its seed (plus cfg and fault flag) and returns true when the property
// holds for that case.

std::vector<std::int8_t> random_row(Rng& rng, int min_len, int max_len, int lo, int hi) {
  const int len = static_cast<int>(rng.next_in(min_len, max_len));
  std::vector<std::int8_t> row(static_cast<std::size_t>(len));
  for (auto& c : row) c = static_cast<std::int8_t>(rng.next_in(lo, hi));
  return row;
}

bool prop_translation_invariance(Rng& rng, const AcceleratorConfig& cfg) {
  const int t = static_cast<int>(rng.next_in(0, 60));
  const auto row = random_row(rng, 1, 2 * cfg.m, kCodeMin, kCodeMax - t);
  auto shifted = row;
  for (auto& c : shifted) c = static_cast<std::int8_t>(c + t);
  return streaming_softmax_row(row, cfg.m) == streaming_softmax_row(shifted, cfg.m);
}

bool prop_monotonicity(Rng& rng, const AcceleratorConfig& cfg) {
  const auto row = random_row(rng, 1, 2 * cfg.m, kCodeMin, kCodeMax);
  const auto out = streaming_softmax_row(row, cfg.m);
  for (std::size_t i = 0; i < row.size(); ++i)
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[i] <= row[j] && out[i] > out[j]) return false;
  return true;
}

bool prop_denominator_bound(Rng& rng, const AcceleratorConfig& cfg) {
  const auto row = random_row(rng, 1, 2 * cfg.m, kCodeMin, kCodeMax);
  SoftmaxState st(1);
  for (std::size_t begin = 0; begin < row.size();
       begin += static_cast<std::size_t>(cfg.m)) {
    const std::size_t len =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.m), row.size() - begin);
    st.da_update(0, std::span<const std::int8_t>(row.data() + begin, len));
  }
  if (st.sum_at(0) < 128) return false;
  st.di_invert(0);  // must not throw
  return st.inv_at(0) >= 1 && st.inv_at(0) <= 255;
}

bool prop_output_range_argmax(Rng& rng, const AcceleratorConfig& cfg) {
  const auto row = random_row(rng, 1, 2 * cfg.m, kCodeMin, kCodeMax);
  const auto out = streaming_softmax_row(row, cfg.m);
  const std::size_t argmax =
      static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  const std::uint8_t top = *std::max_element(out.begin(), out.end());
  return out[argmax] == top && top >= 1;
}

bool prop_streaming_single_pass(Rng& rng, const AcceleratorConfig& cfg,
                                FaultInjection fault) {
  // At least two parts, and the global maximum moved into the first one.
  const int max_len = std::min(255, 4 * cfg.m);
  const auto min_len = std::min(cfg.m + 1, max_len);
  auto row = random_row(rng, min_len, max_len, kCodeMin, kCodeMax);
  const auto argmax = std::max_element(row.begin(), row.end()) - row.begin();
  const auto target = rng.next_in(0, std::min<std::int64_t>(cfg.m, row.size()) - 1);
  std::swap(row[static_cast<std::size_t>(argmax)], row[static_cast<std::size_t>(target)]);
  const auto policy = fault == FaultInjection::kMisorderedRescale
                          ? SoftmaxState::DaPolicy::kPartLumpRescale
                          : SoftmaxState::DaPolicy::kStaleRescale;
  const auto streamed = streaming_softmax_row(row, cfg.m, SoftmaxConstants{}, policy);
  return streamed == softmax_row_integer_oracle(row);
}

bool prop_tiled_naive_matmul(Rng& rng, const AcceleratorConfig& cfg) {
  const int rows = static_cast<int>(rng.next_in(1, 96));
  const int inner = static_cast<int>(rng.next_in(1, 96));
  const int cols = static_cast<int>(rng.next_in(1, 96));
  QuantizedMatrix a(rows, inner, 1.0), b(inner, cols, 1.0);
  for (auto& c : a.codes) c = rng.next_code();
  for (auto& c : b.codes) c = rng.next_code();
  std::vector<std::int8_t> bias;
  if (rng.next_in(0, 1) == 1) {
    bias.resize(static_cast<std::size_t>(cols));
    for (auto& c : bias) c = rng.next_code();
  }
  const AccumMatrix tiled = tiled_matmul(a, b, bias, cfg);
  const AccumMatrix plain = naive_matmul(a, b, bias);
  return tiled.values == plain.values;
}

bool prop_fused_unfused(Rng& rng, const AcceleratorConfig& cfg) {
  AttentionDims dims;
  dims.s = static_cast<int>(rng.next_in(1, std::min(96, 2 * cfg.m)));
  dims.e = static_cast<int>(rng.next_in(4, 24));
  dims.p = static_cast<int>(rng.next_in(4, 24));
  dims.h = static_cast<int>(rng.next_in(1, 2));
  const AttentionFixture f = make_fixture(rng.next_u64(), dims, cfg);
  AttentionOptions fused{true, true};
  AttentionOptions unfused{false, true};
  const AttentionOutput a = multi_head_attention(f.input, f.weights, cfg, dims, fused);
  const AttentionOutput b = multi_head_attention(f.input, f.weights, cfg, dims, unfused);
  if (a.output.codes != b.output.codes) return false;
  for (int h = 0; h < dims.h; ++h)
    if (a.probs[static_cast<std::size_t>(h)].values !=
        b.probs[static_cast<std::size_t>(h)].values)
      return false;
  return true;
}

bool prop_overflow_freedom(Rng& rng, const AcceleratorConfig& cfg) {
  // Extreme codes over a random inner dimension up to the bound; the
  // accumulator must stay within the signed D-bit range.
  const int inner = static_cast<int>(rng.next_in(1, overflow_free_inner_limit(cfg)));
  QuantizedMatrix a(1, inner, 1.0), b(inner, 1, 1.0);
  for (auto& c : a.codes)
    c = static_cast<std::int8_t>(rng.next_in(0, 1) == 0 ? kCodeMin : kCodeMax);
  for (auto& c : b.codes)
    c = static_cast<std::int8_t>(rng.next_in(0, 1) == 0 ? kCodeMin : kCodeMax);
  std::vector<std::int8_t> bias(1, static_cast<std::int8_t>(rng.next_in(kCodeMin, kCodeMax)));
  const AccumMatrix acc = tiled_matmul(a, b, bias, cfg);
  const std::int64_t bound = (std::int64_t{1} << (cfg.d - 1)) - 1;
  return std::abs(static_cast<std::int64_t>(acc.at(0, 0))) <= bound;
}

struct PropertyEntry {
  const char* name;
  bool uses_fault;
};

constexpr PropertyEntry kProperties[] = {
    {"translation-invariance", false}, {"monotonicity", false},
    {"denominator-lower-bound", false}, {"output-range-argmax", false},
    {"streaming-single-pass", true},   {"tiled-naive-matmul", false},
    {"fused-unfused-attention", false}, {"overflow-freedom", false},
};

bool dispatch_property(int index, std::uint64_t seed, const AcceleratorConfig& cfg,
                       FaultInjection fault) {
  Rng rng(seed);
  switch (index) {
    case 0: return prop_translation_invariance(rng, cfg);
    case 1: return prop_monotonicity(rng, cfg);
    case 2: return prop_denominator_bound(rng, cfg);
    case 3: return prop_output_range_argmax(rng, cfg);
    case 4: return prop_streaming_single_pass(rng, cfg, fault);
    case 5: return prop_tiled_naive_matmul(rng, cfg);
    case 6: return prop_fused_unfused(rng, cfg);
    case 7: return prop_overflow_freedom(rng, cfg);
    default: throw std::invalid_argument("unknown property index");
  }
}

}  // namespace

bool SuiteResult::all_passed() const {
  for (const auto& p : properties)
    if (p.failures > 0) return false;
  return true;
}

int SuiteResult::total_failures() const {
  int total = 0;
  for (const auto& p : properties) total += p.failures;
  return total;
}

SuiteResult run_equivalence_suite(const AcceleratorConfig& cfg, std::uint64_t seed,
                                  int cases_per_property, FaultInjection fault) {
  cfg.validate();
  if (cases_per_property < 1)
    throw std::invalid_argument("equivalence suite: cases_per_property must be >= 1");

  SuiteResult result;
  const int prop_count = static_cast<int>(std::size(kProperties));
  for (int pi = 0; pi < prop_count; ++pi) {
    PropertyResult pr;
    pr.name = kProperties[pi].name;
    pr.cases = cases_per_property;

    std::vector<std::uint8_t> failed(static_cast<std::size_t>(cases_per_property), 0);
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cases_per_property), 0);
    parallel_for(cases_per_property, [&](std::int64_t begin, std::int64_t end) {
      for (std::int64_t i = begin; i < end; ++i) {
        const std::uint64_t cs = case_seed(seed, pi, static_cast<int>(i));
        seeds[static_cast<std::size_t>(i)] = cs;
        const FaultInjection f =
            kProperties[pi].uses_fault ? fault : FaultInjection::kNone;
        if (!dispatch_property(pi, cs, cfg, f)) failed[static_cast<std::size_t>(i)] = 1;
      }
    });
    for (int i = 0; i < cases_per_property; ++i) {
      if (failed[static_cast<std::size_t>(i)]) {
        if (pr.failures == 0) pr.first_failure_seed = seeds[static_cast<std::size_t>(i)];
        ++pr.failures;
      }
    }
    result.properties.push_back(std::move(pr));
  }
  return result;
}

bool run_property_case(const std::string& property, std::uint64_t cs,
                       const AcceleratorConfig& cfg, FaultInjection fault) {
  for (int pi = 0; pi < static_cast<int>(std::size(kProperties)); ++pi)
    if (property == kProperties[pi].name)
      return dispatch_property(pi, cs, cfg,
                               kProperties[pi].uses_fault ? fault : FaultInjection::kNone);
  throw std::invalid_argument("unknown property '" + property + "'");
}

namespace {

RealMatrix real_matmul(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out(a.rows, b.cols);
  for (int r = 0; r < a.rows; ++r)
    for (int k = 0; k < a.cols; ++k) {
      const double av = a.at(r, k);
      for (int c = 0; c < b.cols; ++c) out.at(r, c) += av * b.at(k, c);
    }
  return out;
}

void real_add_bias(RealMatrix& m, const std::vector<std::int8_t>& bias, double unit) {
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      m.at(r, c) += unit * static_cast<double>(bias[static_cast<std::size_t>(c)]);
}

double max_abs(const RealMatrix& m) {
  double mx = 0.0;
  for (const double v : m.values) mx = std::max(mx, std::abs(v));
  return mx;
}

RealMatrix gaussian_matrix(Rng& rng, int rows, int cols, double sigma) {
  RealMatrix m(rows, cols);
  for (auto& v : m.values) v = sigma * rng.next_gaussian();
  return m;
}

std::vector<std::int8_t> small_bias(Rng& rng, int len) {
  std::vector<std::int8_t> b(static_cast<std::size_t>(len));
  for (auto& c : b) c = static_cast<std::int8_t>(rng.next_in(-16, 16));
  return b;
}

double quant_scale_for(double mx) { return mx > 0.0 ? mx / 127.0 : 1.0; }

}  // namespace

AttentionFixture make_fixture(std::uint64_t seed, const AttentionDims& dims,
                              const AcceleratorConfig& cfg) {
  dims.validate();
  cfg.validate();
  const Rng root(seed);
  const int s = dims.s, e = dims.e, p = dims.p, h = dims.h;

  Rng rng_x = root.fork(0);
  const RealMatrix xf = gaussian_matrix(rng_x, s, e, 1.0);
  const double sx = quant_scale_for(max_abs(xf));

  AttentionFixture f;
  f.dims = dims;
  f.input = quantize(xf, sx);

  Rng rng_wo = root.fork(1);
  const RealMatrix wof = gaussian_matrix(rng_wo, h * p, e, 1.0 / std::sqrt(double(h * p)));
  Rng rng_bo = root.fork(2);
  f.weights.bo = small_bias(rng_bo, e);

  // Raw per-head reals first; every kind then shares one tensor scale so
  // each projection step can share one requant setting across heads.
  std::vector<RealMatrix> wqf, wkf, wvf;
  double mx_wq = 0.0, mx_wk = 0.0, mx_wv = 0.0;
  const double wsigma = 1.0 / std::sqrt(static_cast<double>(e));
  f.weights.heads.resize(static_cast<std::size_t>(h));
  for (int head = 0; head < h; ++head) {
    Rng rq = root.fork(3 + 4 * static_cast<std::uint64_t>(head));
    Rng rk = root.fork(4 + 4 * static_cast<std::uint64_t>(head));
    Rng rv = root.fork(5 + 4 * static_cast<std::uint64_t>(head));
    Rng rb = root.fork(6 + 4 * static_cast<std::uint64_t>(head));
    wqf.push_back(gaussian_matrix(rq, e, p, wsigma));
    wkf.push_back(gaussian_matrix(rk, e, p, wsigma));
    wvf.push_back(gaussian_matrix(rv, e, p, wsigma));
    HeadWeights& hw = f.weights.heads[static_cast<std::size_t>(head)];
    hw.bq = small_bias(rb, p);
    hw.bk = small_bias(rb, p);
    hw.bv = small_bias(rb, p);
    mx_wq = std::max(mx_wq, max_abs(wqf.back()));
    mx_wk = std::max(mx_wk, max_abs(wkf.back()));
    mx_wv = std::max(mx_wv, max_abs(wvf.back()));
  }
  double swq = quant_scale_for(mx_wq);
  double swk = quant_scale_for(mx_wk);
  const double swv = quant_scale_for(mx_wv);
  const double swo = quant_scale_for(max_abs(wof));
  for (int head = 0; head < h; ++head) {
    HeadWeights& hw = f.weights.heads[static_cast<std::size_t>(head)];
    hw.wq = quantize(wqf[static_cast<std::size_t>(head)], swq);
    hw.wk = quantize(wkf[static_cast<std::size_t>(head)], swk);
    hw.wv = quantize(wvf[static_cast<std::size_t>(head)], swv);
  }
  f.weights.wo = quantize(wof, swo);

  // Staged real model over the dequantized tensors, for calibration only.
  const RealMatrix xd = dequantize(f.input);
  std::vector<RealMatrix> qf, kf, vf, logits;
  double mx_q = 0.0, mx_k = 0.0, mx_v = 0.0;
  double logit_sq = 0.0;
  std::uint64_t logit_n = 0;
  for (int head = 0; head < h; ++head) {
    const HeadWeights& hw = f.weights.heads[static_cast<std::size_t>(head)];
    RealMatrix q = real_matmul(xd, dequantize(hw.wq));
    RealMatrix k = real_matmul(xd, dequantize(hw.wk));
    RealMatrix v = real_matmul(xd, dequantize(hw.wv));
    real_add_bias(q, hw.bq, sx * swq);
    real_add_bias(k, hw.bk, sx * swk);
    real_add_bias(v, hw.bv, sx * swv);
    RealMatrix l(s, s);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        double acc = 0.0;
        for (int j = 0; j < p; ++j) acc += q.at(r, j) * k.at(c, j);
        l.at(r, c) = acc;
        logit_sq += acc * acc;
        ++logit_n;
      }
    qf.push_back(std::move(q));
    kf.push_back(std::move(k));
    vf.push_back(std::move(v));
    logits.push_back(std::move(l));
    mx_v = std::max(mx_v, max_abs(vf.back()));
  }

  // Aim the logit spread at the window the shift-softmax resolves: about
  // 40 codes of one-code-per-epsilon. The factor moves only the scales, so
  // the committed codes stay put.
  const double eps = softmax_code_scale(cfg.b);
  const double rms = logit_n > 0 ? std::sqrt(logit_sq / static_cast<double>(logit_n)) : 0.0;
  const double factor = rms > 0.0 ? (40.0 * eps) / rms : 1.0;
  const double root_factor = std::sqrt(factor);
  swq *= root_factor;
  swk *= root_factor;
  for (int head = 0; head < h; ++head) {
    f.weights.heads[static_cast<std::size_t>(head)].wq.scale = swq;
    f.weights.heads[static_cast<std::size_t>(head)].wk.scale = swk;
    for (auto& v : qf[static_cast<std::size_t>(head)].values) v *= root_factor;
    for (auto& v : kf[static_cast<std::size_t>(head)].values) v *= root_factor;
    for (auto& v : logits[static_cast<std::size_t>(head)].values) v *= factor;
    mx_q = std::max(mx_q, max_abs(qf[static_cast<std::size_t>(head)]));
    mx_k = std::max(mx_k, max_abs(kf[static_cast<std::size_t>(head)]));
  }

  auto full_range_ratio = [](double acc_scale, double mx) {
    return acc_scale / quant_scale_for(mx);
  };
  f.weights.rq_q = choose_requant_params(full_range_ratio(sx * swq, mx_q), sx, swq);
  f.weights.rq_k = choose_requant_params(full_range_ratio(sx * swk, mx_k), sx, swk);
  f.weights.rq_v = choose_requant_params(full_range_ratio(sx * swv, mx_v), sx, swv);
  f.weights.rq_qk =
      choose_requant_params(f.weights.rq_q.output_scale * f.weights.rq_k.output_scale / eps,
                            f.weights.rq_q.output_scale, f.weights.rq_k.output_scale);

  // Probabilities carry scale 1/255 into the A*V step.
  double mx_av = 0.0;
  RealMatrix concat(s, h * p);
  for (int head = 0; head < h; ++head) {
    const RealMatrix& l = logits[static_cast<std::size_t>(head)];
    RealMatrix probs(s, s);
    for (int r = 0; r < s; ++r) {
      double mx = l.at(r, 0);
      for (int c = 1; c < s; ++c) mx = std::max(mx, l.at(r, c));
      double sum = 0.0;
      for (int c = 0; c < s; ++c) {
        probs.at(r, c) = std::exp(l.at(r, c) - mx);
        sum += probs.at(r, c);
      }
      for (int c = 0; c < s; ++c) probs.at(r, c) /= sum;
    }
    const RealMatrix av = real_matmul(probs, vf[static_cast<std::size_t>(head)]);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < p; ++c) concat.at(r, head * p + c) = av.at(r, c);
    mx_av = std::max(mx_av, max_abs(av));
  }
  const double prob_scale = 1.0 / 255.0;
  f.weights.rq_av = choose_requant_params(
      full_range_ratio(prob_scale * f.weights.rq_v.output_scale, mx_av), prob_scale,
      f.weights.rq_v.output_scale);

  RealMatrix outf = real_matmul(concat, dequantize(f.weights.wo));
  real_add_bias(outf, f.weights.bo, f.weights.rq_av.output_scale * swo);
  f.weights.rq_out = choose_requant_params(
      full_range_ratio(f.weights.rq_av.output_scale * swo, max_abs(outf)),
      f.weights.rq_av.output_scale, swo);

  f.validate();
  return f;
}

ErrorReport attention_error_report(const AttentionFixture& f, const AcceleratorConfig& cfg) {
  f.validate();
  cfg.validate();
  AttentionOptions opt;
  opt.fused = true;
  opt.keep_probs = true;
  const AttentionOutput got = multi_head_attention(f.input, f.weights, cfg, f.dims, opt);
  const GoldenAttention golden = float_golden_attention(f.input, f.weights, f.dims);

  ErrorReport report;
  double sum_abs = 0.0;
  std::uint64_t n = 0;
  for (int h = 0; h < f.dims.h; ++h) {
    const ProbMatrix& pm = got.probs[static_cast<std::size_t>(h)];
    const RealMatrix& gp = golden.probs[static_cast<std::size_t>(h)];
    for (std::size_t i = 0; i < pm.values.size(); ++i) {
      const double err =
          std::abs(static_cast<double>(pm.values[i]) / 255.0 - gp.values[i]);
      sum_abs += err;
      report.softmax_max_abs_err = std::max(report.softmax_max_abs_err, err);
      ++report.histogram[static_cast<std::size_t>(ErrorReport::bucket_of(err))];
      ++n;
    }
  }
  report.samples = n;
  report.softmax_mae = n > 0 ? sum_abs / static_cast<double>(n) : 0.0;

  double out_abs = 0.0;
  for (std::size_t i = 0; i < got.output.codes.size(); ++i)
    out_abs += std::abs(static_cast<double>(got.output.codes[i]) * got.output.scale -
                        golden.output.values[i]);
  report.end_to_end_output_mae =
      got.output.codes.empty() ? 0.0 : out_abs / static_cast<double>(got.output.codes.size());
  return report;
}

}  // namespace ita
