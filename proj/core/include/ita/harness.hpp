//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ita/attention.hpp"
#include "ita/manifest.hpp"
#include "ita/rng.hpp"

namespace ita {

// Synthetic input families for sweeps. The text forms accepted by parse:
//   "uniform"             uniform codes over [-128, 127]
//   "gaussian:MEAN,SIGMA" rounded/clamped normal draws ("gaussian" = 0,40)
//   "peaked:FRACTION"     FRACTION of elements near the top code, the rest
//                         uniform over [-128, 0]
//   "constant:VALUE"      every element VALUE (closed-form error checks)
enum class DistKind { kUniform, kGaussian, kPeaked, kConstant };

struct InputDistribution {
  DistKind kind = DistKind::kGaussian;
  double mean = 0.0;
  double sigma = 40.0;
  double fraction = 0.1;
  int constant_value = 0;

  static InputDistribution parse(const std::string& text);
  std::string describe() const;
  void validate() const;
};

struct ExperimentSpec {
  std::uint64_t seed = 42;
  AttentionDims dims{};
  AcceleratorConfig cfg{};
  InputDistribution dist{};
  int repetitions = 1;  // rows to generate; row length is dims.s

  void validate() const;
};

// Aggregated integer-vs-real error metrics. Histogram buckets split the
// absolute error at decades 1e-5, 1e-4, 1e-3, 1e-2, 1e-1.
struct ErrorReport {
  double softmax_mae = 0.0;
  double softmax_max_abs_err = 0.0;
  double end_to_end_output_mae = 0.0;
  std::uint64_t samples = 0;
  std::array<std::uint64_t, 6> histogram{};

  void merge(const ErrorReport& other);
  static int bucket_of(double abs_err);
};

// One row per repetition through the streaming softmax and the real
// oracle. Deterministic in spec.seed regardless of thread count.
ErrorReport run_softmax_sweep(const ExperimentSpec& spec);

std::vector<std::int8_t> generate_row(Rng& rng, int len, const InputDistribution& dist);

// Mutation hook for suite sensitivity: kMisorderedRescale swaps the
// streaming denominator update for the lump-rescale variant.
enum class FaultInjection { kNone, kMisorderedRescale };

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::uint64_t first_failure_seed = 0;  // reseeds the failing case exactly
};

struct SuiteResult {
  std::vector<PropertyResult> properties;

  bool all_passed() const;
  int total_failures() const;
};

// Seeded property suite over the softmax and attention engines:
// translation invariance, monotonicity, denominator lower bound, output
// range and argmax dominance, streaming-vs-single-pass equality with the
// maximum in the first part, tiled-vs-naive matmul equality, fused-vs-
// unfused attention equality, accumulator overflow-freedom.
SuiteResult run_equivalence_suite(const AcceleratorConfig& cfg, std::uint64_t seed,
                                  int cases_per_property = 1000,
                                  FaultInjection fault = FaultInjection::kNone);

// Replays a single case of a named property with the exact seed a failing
// run reported; returns true when the property holds.
bool run_property_case(const std::string& property, std::uint64_t cs,
                       const AcceleratorConfig& cfg,
                       FaultInjection fault = FaultInjection::kNone);

// Deterministic synthetic workload: seeded input and weights, requant
// parameters calibrated against a staged real-arithmetic model so that
// every stage's range maps onto the 8-bit code range and the attention
// logits land at the scale the shift-softmax is built for.
AttentionFixture make_fixture(std::uint64_t seed, const AttentionDims& dims,
                              const AcceleratorConfig& cfg);

// Integer pipeline vs the real golden model on one fixture: probability
// MAE and end-to-end output error in dequantized units.
ErrorReport attention_error_report(const AttentionFixture& f, const AcceleratorConfig& cfg);

// JSON serialization (schema_version 1); implemented in report_json.cpp.
std::string to_json(const ErrorReport& rep, const ExperimentSpec& spec);
std::string to_json(const SuiteResult& result);

}  // namespace ita
