//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/perf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ita {

void AcceleratorConfig::validate() const {
  if (n < 1) throw std::invalid_argument("AcceleratorConfig: n must be positive");
  if (m < 1) throw std::invalid_argument("AcceleratorConfig: m must be positive");
  if (d < 1 || d > 32) throw std::invalid_argument("AcceleratorConfig: d must be in [1, 32]");
  if (b != 4 && b != 8)
    throw std::invalid_argument("AcceleratorConfig: b must be a power of two in [4, 8]");
  if (d <= 2 * b)
    throw std::invalid_argument("AcceleratorConfig: d must exceed 2*b for overflow freedom");
  if (!(freq_hz > 0.0) || !std::isfinite(freq_hz))
    throw std::invalid_argument("AcceleratorConfig: freq_hz must be positive");
  if (divider_latency_cycles < 1)
    throw std::invalid_argument("AcceleratorConfig: divider latency must be positive");
  if (divider_count < 1)
    throw std::invalid_argument("AcceleratorConfig: divider count must be positive");
  if (fifo_depth_bytes < 0)
    throw std::invalid_argument("AcceleratorConfig: fifo depth must be non-negative");
  if (fifo_drain_bytes_per_cycle < 0.0)
    throw std::invalid_argument("AcceleratorConfig: fifo drain rate must be non-negative");
}

void AttentionDims::validate() const {
  if (s < 1) throw std::invalid_argument("AttentionDims: s must be positive");
  if (e < 1) throw std::invalid_argument("AttentionDims: e must be positive");
  if (p < 1) throw std::invalid_argument("AttentionDims: p must be positive");
  if (h < 1) throw std::invalid_argument("AttentionDims: h must be positive");
}

int overflow_free_inner_limit(const AcceleratorConfig& cfg) {
  return 1 << (cfg.d - 2 * cfg.b);
}

std::uint64_t bandwidth_weight_stationary(const AcceleratorConfig& cfg) {
  return 8ull * (static_cast<std::uint64_t>(cfg.m) + 3ull * cfg.n) +
         2ull * cfg.n * cfg.d;
}

std::uint64_t bandwidth_output_stationary(const AcceleratorConfig& cfg) {
  return 8ull * (static_cast<std::uint64_t>(cfg.n) * cfg.m + 3ull * cfg.n) +
         2ull * cfg.n * cfg.d;
}

std::uint64_t weight_buffer_bytes(const AcceleratorConfig& cfg) {
  return 2ull * cfg.n * cfg.m;
}

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// One M x M output tile: M cycles per PE group per inner chunk.
std::uint64_t tile_cycles(const AcceleratorConfig& cfg, int inner) {
  const std::uint64_t groups = ceil_div(cfg.m, cfg.n);
  return static_cast<std::uint64_t>(cfg.m) * groups * ceil_div(inner, cfg.m);
}

void emit_matmul(std::vector<TileOp>& ops, SchedulePhase phase, int head,
                 const AcceleratorConfig& cfg, int out_rows, int out_cols, int inner) {
  const int row_tiles = static_cast<int>(ceil_div(out_rows, cfg.m));
  const int col_tiles = static_cast<int>(ceil_div(out_cols, cfg.m));
  const bool inner_padded = inner % cfg.m != 0;
  const std::uint64_t cycles = tile_cycles(cfg, inner);
  for (int ti = 0; ti < row_tiles; ++ti) {
    for (int tj = 0; tj < col_tiles; ++tj) {
      const bool padded = inner_padded || (ti == row_tiles - 1 && out_rows % cfg.m != 0) ||
                          (tj == col_tiles - 1 && out_cols % cfg.m != 0);
      ops.push_back(TileOp{phase, head, ti, tj, cycles, padded, false});
    }
  }
}

}  // namespace

TileSchedule build_schedule(const AttentionDims& dims, const AcceleratorConfig& cfg,
                            SoftmaxTiming timing) {
  dims.validate();
  cfg.validate();
  TileSchedule sched;
  sched.dims = dims;
  sched.cfg = cfg;
  sched.timing = timing;

  const int row_blocks = static_cast<int>(ceil_div(dims.s, cfg.m));
  for (int h = 0; h < dims.h; ++h) {
    emit_matmul(sched.ops, SchedulePhase::kProjQ, h, cfg, dims.s, dims.p, dims.e);
    emit_matmul(sched.ops, SchedulePhase::kProjK, h, cfg, dims.s, dims.p, dims.e);
    emit_matmul(sched.ops, SchedulePhase::kProjV, h, cfg, dims.s, dims.p, dims.e);
    for (int i = 0; i < row_blocks; ++i) {
      // Attention row span i: J tiles of Q*K^T with denominator
      // accumulation folded into the final chunk of each tile.
      const int j_tiles = row_blocks;
      const std::uint64_t qk_cycles = tile_cycles(cfg, dims.p);
      for (int j = 0; j < j_tiles; ++j) {
        const bool padded = dims.p % cfg.m != 0 ||
                            (i == row_blocks - 1 && dims.s % cfg.m != 0) ||
                            (j == j_tiles - 1 && dims.s % cfg.m != 0);
        sched.ops.push_back(TileOp{SchedulePhase::kQkDa, h, i, j, qk_cycles, padded, false});
      }
      if (timing != SoftmaxTiming::kFree) {
        const int rows = std::min(cfg.m, dims.s - i * cfg.m);
        const std::uint64_t demand =
            ceil_div(rows, cfg.divider_count) *
            static_cast<std::uint64_t>(cfg.divider_latency_cycles);
        const bool overlapped = timing == SoftmaxTiming::kOverlapped;
        sched.ops.push_back(TileOp{SchedulePhase::kDi, h, i, 0, demand, false, overlapped});
      }
      // A*V for the span: one row of output tiles across P, re-reading the
      // attention row while normalizing it.
      const int p_tiles = static_cast<int>(ceil_div(dims.p, cfg.m));
      const int block_rows = std::min(cfg.m, dims.s - i * cfg.m);
      const std::uint64_t av_cycles = tile_cycles(cfg, dims.s);
      for (int pt = 0; pt < p_tiles; ++pt) {
        const bool padded = dims.s % cfg.m != 0 || block_rows != cfg.m ||
                            (pt == p_tiles - 1 && dims.p % cfg.m != 0);
        sched.ops.push_back(TileOp{SchedulePhase::kAvEn, h, i, pt, av_cycles, padded, false});
      }
    }
  }
  emit_matmul(sched.ops, SchedulePhase::kOutProj, 0, cfg, dims.s, dims.e, dims.h * dims.p);
  return sched;
}

PerfReport simulate_perf(const TileSchedule& sched, const AcceleratorConfig& cfg) {
  cfg.validate();
  sched.dims.validate();
  if (sched.ops.empty()) throw std::invalid_argument("simulate_perf: empty schedule");

  PerfReport rep;
  rep.bandwidth_ws_bits = bandwidth_weight_stationary(cfg);
  rep.bandwidth_os_bits = bandwidth_output_stationary(cfg);
  rep.weight_buffer_bytes = ita::weight_buffer_bytes(cfg);

  // Divider overlap: the inversions of one attention row span hide under
  // the span's own Q*K^T production and its A*V consumption. Demand beyond
  // that span stalls the array.
  struct BlockWindow {
    std::uint64_t span = 0;
    std::uint64_t demand = 0;
  };
  std::vector<std::vector<BlockWindow>> windows;  // [head][block]
  const int row_blocks = static_cast<int>((sched.dims.s + cfg.m - 1) / cfg.m);
  windows.assign(static_cast<std::size_t>(sched.dims.h),
                 std::vector<BlockWindow>(static_cast<std::size_t>(row_blocks)));

  std::uint64_t pe_cycles = 0;
  std::uint64_t serialized_di = 0;
  for (const TileOp& op : sched.ops) {
    switch (op.phase) {
      case SchedulePhase::kProjQ:
      case SchedulePhase::kProjK:
      case SchedulePhase::kProjV:
        rep.cycles_projections += op.cycles;
        pe_cycles += op.cycles;
        break;
      case SchedulePhase::kQkDa:
        rep.cycles_qk += op.cycles;
        pe_cycles += op.cycles;
        windows[op.head][op.tile_row].span += op.cycles;
        break;
      case SchedulePhase::kAvEn:
        rep.cycles_av += op.cycles;
        pe_cycles += op.cycles;
        windows[op.head][op.tile_row].span += op.cycles;
        break;
      case SchedulePhase::kOutProj:
        rep.cycles_out_projection += op.cycles;
        pe_cycles += op.cycles;
        break;
      case SchedulePhase::kDi:
        windows[op.head][op.tile_row].demand += op.cycles;
        if (!op.overlapped) serialized_di += op.cycles;
        break;
    }
  }

  rep.divider_demand_cycles = 0;
  rep.divider_span_cycles = 0;
  for (const auto& head : windows) {
    for (const BlockWindow& w : head) {
      rep.divider_demand_cycles += w.demand;
      rep.divider_span_cycles += w.span;
      if (sched.timing == SoftmaxTiming::kOverlapped && w.demand > w.span)
        rep.softmax_stall_cycles += w.demand - w.span;
    }
  }
  rep.divider_ok = rep.softmax_stall_cycles == 0;
  if (!rep.divider_ok)
    rep.violation = "divider demand exceeds the overlap span; softmax stalls the array";

  rep.total_cycles = pe_cycles + rep.softmax_stall_cycles + serialized_di;

  // FIFO model: outputs stream at N bytes/cycle; with a finite drain rate
  // the run cannot finish before the FIFO empties.
  if (cfg.fifo_drain_bytes_per_cycle > 0.0) {
    const double produced = static_cast<double>(pe_cycles) * cfg.n;
    const double horizon = std::max(
        static_cast<double>(rep.total_cycles),
        (produced - cfg.fifo_depth_bytes) / cfg.fifo_drain_bytes_per_cycle);
    const std::uint64_t stalled = static_cast<std::uint64_t>(std::ceil(horizon));
    if (stalled > rep.total_cycles) {
      rep.fifo_stall_cycles = stalled - rep.total_cycles;
      rep.total_cycles = stalled;
      if (rep.violation.empty())
        rep.violation = "output FIFO drain rate limits throughput";
    }
  }

  // Useful work excludes padding; one MAC is two operations.
  const AttentionDims& d = sched.dims;
  const double useful_macs =
      static_cast<double>(d.h) *
          (3.0 * d.s * d.e * d.p + 2.0 * static_cast<double>(d.s) * d.s * d.p) +
      static_cast<double>(d.s) * (static_cast<double>(d.h) * d.p) * d.e;
  rep.mac_utilization =
      useful_macs / (static_cast<double>(rep.total_cycles) * cfg.n * cfg.m);
  rep.throughput_tops = 2.0 * cfg.n * cfg.m * cfg.freq_hz * rep.mac_utilization / 1e12;

  // Traffic: cycles times the per-cycle interface widths. The weight
  // interface is the double-buffered N bytes/cycle, not N*M.
  auto traffic_for = [&cfg](std::uint64_t cycles) {
    PhaseTraffic t;
    t.input_bytes = cycles * static_cast<std::uint64_t>(cfg.m);
    t.weight_bytes = cycles * static_cast<std::uint64_t>(cfg.n);
    t.bias_bytes = cycles * static_cast<std::uint64_t>(cfg.n);
    t.output_bytes = cycles * static_cast<std::uint64_t>(cfg.n);
    t.partial_sum_bytes = cycles * 2ull * cfg.n * cfg.d / 8ull;
    return t;
  };
  rep.traffic_projections = traffic_for(rep.cycles_projections);
  rep.traffic_qk = traffic_for(rep.cycles_qk);
  rep.traffic_av = traffic_for(rep.cycles_av);
  rep.traffic_out_projection = traffic_for(rep.cycles_out_projection);
  rep.traffic_total.input_bytes =
      rep.traffic_projections.input_bytes + rep.traffic_qk.input_bytes +
      rep.traffic_av.input_bytes + rep.traffic_out_projection.input_bytes;
  rep.traffic_total.weight_bytes =
      rep.traffic_projections.weight_bytes + rep.traffic_qk.weight_bytes +
      rep.traffic_av.weight_bytes + rep.traffic_out_projection.weight_bytes;
  rep.traffic_total.bias_bytes =
      rep.traffic_projections.bias_bytes + rep.traffic_qk.bias_bytes +
      rep.traffic_av.bias_bytes + rep.traffic_out_projection.bias_bytes;
  rep.traffic_total.output_bytes =
      rep.traffic_projections.output_bytes + rep.traffic_qk.output_bytes +
      rep.traffic_av.output_bytes + rep.traffic_out_projection.output_bytes;
  rep.traffic_total.partial_sum_bytes =
      rep.traffic_projections.partial_sum_bytes + rep.traffic_qk.partial_sum_bytes +
      rep.traffic_av.partial_sum_bytes + rep.traffic_out_projection.partial_sum_bytes;
  return rep;
}

}  // namespace ita
