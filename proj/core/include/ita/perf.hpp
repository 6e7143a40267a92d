//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ita/config.hpp"

namespace ita {

// Memory interface width in bits per cycle when weights stay resident:
// 8(M + 3N) + 2ND. Input row M bytes, weight/bias/output N bytes each,
// partial sums N D-bit words in and out.
std::uint64_t bandwidth_weight_stationary(const AcceleratorConfig& cfg);

// Same interfaces with outputs resident instead: 8(NM + 3N) + 2ND. The
// weight tile can no longer be held, so N*M weight bytes stream per cycle.
std::uint64_t bandwidth_output_stationary(const AcceleratorConfig& cfg);

// Double-buffered resident weight tile: 2*N*M bytes.
std::uint64_t weight_buffer_bytes(const AcceleratorConfig& cfg);

enum class SchedulePhase { kProjQ, kProjK, kProjV, kQkDa, kDi, kAvEn, kOutProj };

enum class SoftmaxTiming {
  kOverlapped,  // inversions hide under the row span's matmul work
  kSerialized,  // inversions occupy the array (debug mode)
  kFree,        // softmax modeled as costless
};

struct TileOp {
  SchedulePhase phase;
  int head = 0;
  int tile_row = 0;  // attention row span for kQkDa / kDi / kAvEn
  int tile_col = 0;
  std::uint64_t cycles = 0;
  bool padded = false;
  bool overlapped = false;  // true only for kDi ops that hide under matmuls
};

struct TileSchedule {
  std::vector<TileOp> ops;
  AttentionDims dims;
  AcceleratorConfig cfg;
  SoftmaxTiming timing = SoftmaxTiming::kOverlapped;
};

TileSchedule build_schedule(const AttentionDims& dims, const AcceleratorConfig& cfg,
                            SoftmaxTiming timing = SoftmaxTiming::kOverlapped);

struct PhaseTraffic {
  std::uint64_t input_bytes = 0;
  std::uint64_t weight_bytes = 0;
  std::uint64_t bias_bytes = 0;
  std::uint64_t output_bytes = 0;
  std::uint64_t partial_sum_bytes = 0;
};

struct PerfReport {
  std::uint64_t total_cycles = 0;
  std::uint64_t cycles_projections = 0;
  std::uint64_t cycles_qk = 0;
  std::uint64_t cycles_av = 0;
  std::uint64_t cycles_out_projection = 0;
  std::uint64_t softmax_stall_cycles = 0;
  std::uint64_t fifo_stall_cycles = 0;
  std::uint64_t divider_demand_cycles = 0;
  std::uint64_t divider_span_cycles = 0;
  bool divider_ok = true;
  std::string violation;  // non-empty when a stall source fired
  double mac_utilization = 0.0;
  double throughput_tops = 0.0;
  std::uint64_t bandwidth_ws_bits = 0;
  std::uint64_t bandwidth_os_bits = 0;
  std::uint64_t weight_buffer_bytes = 0;
  PhaseTraffic traffic_projections, traffic_qk, traffic_av, traffic_out_projection,
      traffic_total;
};

PerfReport simulate_perf(const TileSchedule& sched, const AcceleratorConfig& cfg);

// JSON serialization (schema_version 1); implemented in report_json.cpp.
std::string to_json(const PerfReport& rep, const AcceleratorConfig& cfg,
                    const AttentionDims& dims);

}  // namespace ita
