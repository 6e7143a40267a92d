//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "ita/perf.hpp"

using namespace ita;

namespace {

AttentionDims make_dims(int s, int e, int p, int h) {
  AttentionDims d;
  d.s = s;
  d.e = e;
  d.p = p;
  d.h = h;
  return d;
}

PerfReport run(const AttentionDims& dims, const AcceleratorConfig& cfg,
               SoftmaxTiming timing = SoftmaxTiming::kOverlapped) {
  return simulate_perf(build_schedule(dims, cfg, timing), cfg);
}

}  // namespace

TEST_CASE("interface widths at the default configuration") {
  AcceleratorConfig cfg;
  CHECK(bandwidth_weight_stationary(cfg) == 1664);  // 8*(64 + 48) + 2*16*24
  CHECK(bandwidth_output_stationary(cfg) == 9344);  // 8*(1024 + 48) + 768
  CHECK(weight_buffer_bytes(cfg) == 2048);          // 2 * 16 * 64
  CHECK(static_cast<double>(bandwidth_output_stationary(cfg)) /
            static_cast<double>(bandwidth_weight_stationary(cfg)) ==
        doctest::Approx(5.615384615384615).epsilon(1e-12));
}

TEST_CASE("interface widths follow the array shape") {
  AcceleratorConfig cfg;
  cfg.n = 32;
  cfg.m = 64;
  cfg.d = 24;
  CHECK(bandwidth_weight_stationary(cfg) == 8 * (64 + 96) + 2 * 32 * 24);
  CHECK(bandwidth_output_stationary(cfg) == 8 * (32 * 64 + 96) + 2 * 32 * 24);
  CHECK(weight_buffer_bytes(cfg) == 4096);
  // Keeping weights resident always needs the narrower interface.
  for (int n : {1, 4, 16, 64}) {
    for (int m : {8, 64, 256}) {
      cfg.n = n;
      cfg.m = m;
      if (n > 1) CHECK(bandwidth_weight_stationary(cfg) < bandwidth_output_stationary(cfg));
    }
  }
}

TEST_CASE("default workload schedule and utilization") {
  AcceleratorConfig cfg;
  const AttentionDims dims = make_dims(64, 64, 64, 1);
  const PerfReport rep = run(dims, cfg);
  CHECK(rep.cycles_projections == 768);
  CHECK(rep.cycles_qk == 256);
  CHECK(rep.cycles_av == 256);
  CHECK(rep.cycles_out_projection == 256);
  CHECK(rep.total_cycles == 1536);
  CHECK(rep.softmax_stall_cycles == 0);
  CHECK(rep.fifo_stall_cycles == 0);
  CHECK(rep.divider_demand_cycles == 512);  // ceil(64/2) * 16
  CHECK(rep.divider_span_cycles == 512);    // 256 QK + 256 AV
  CHECK(rep.divider_ok);
  CHECK(rep.violation.empty());
  CHECK(rep.mac_utilization == doctest::Approx(1.0).epsilon(1e-12));
  // 2 * 16 * 64 * 500 MHz at full utilization.
  CHECK(rep.throughput_tops == doctest::Approx(1.024).epsilon(1e-12));
  CHECK(rep.bandwidth_ws_bits == 1664);
  CHECK(rep.bandwidth_os_bits == 9344);
  CHECK(rep.weight_buffer_bytes == 2048);
}

TEST_CASE("serializing the softmax adds exactly the divider demand") {
  AcceleratorConfig cfg;
  const AttentionDims dims = make_dims(64, 64, 64, 1);
  const PerfReport over = run(dims, cfg, SoftmaxTiming::kOverlapped);
  const PerfReport serial = run(dims, cfg, SoftmaxTiming::kSerialized);
  CHECK(serial.total_cycles == over.total_cycles + over.divider_demand_cycles);
  CHECK(serial.total_cycles == 2048);
  CHECK(serial.softmax_stall_cycles == 0);
  CHECK(serial.mac_utilization == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(serial.throughput_tops == doctest::Approx(0.768).epsilon(1e-12));
}

TEST_CASE("overlap hides the divider across shapes: costless softmax is no faster") {
  AcceleratorConfig cfg;
  const std::vector<AttentionDims> shapes = {
      make_dims(64, 64, 64, 1), make_dims(128, 192, 64, 3), make_dims(70, 70, 70, 2),
      make_dims(1, 8, 8, 1),    make_dims(255, 33, 9, 4),
  };
  for (const AttentionDims& dims : shapes) {
    const PerfReport over = run(dims, cfg, SoftmaxTiming::kOverlapped);
    const PerfReport free = run(dims, cfg, SoftmaxTiming::kFree);
    CHECK(over.total_cycles == free.total_cycles);
    CHECK(over.softmax_stall_cycles == 0);
    CHECK(over.divider_ok);
    CHECK(free.divider_demand_cycles == 0);
  }
  // The same holds on a small array as long as two dividers keep up.
  AcceleratorConfig small = cfg;
  small.m = 8;
  small.n = 4;
  for (const AttentionDims& dims : shapes) {
    const PerfReport over = run(dims, small, SoftmaxTiming::kOverlapped);
    const PerfReport free = run(dims, small, SoftmaxTiming::kFree);
    CHECK(over.total_cycles == free.total_cycles);
  }
}

TEST_CASE("a single divider cannot keep up with the default span") {
  AcceleratorConfig cfg;
  cfg.divider_count = 1;
  const AttentionDims dims = make_dims(64, 64, 64, 1);
  const PerfReport rep = run(dims, cfg);
  CHECK(rep.divider_demand_cycles == 1024);  // 64 rows * 16 cycles
  CHECK(rep.divider_span_cycles == 512);
  CHECK(!rep.divider_ok);
  CHECK(!rep.violation.empty());
  CHECK(rep.softmax_stall_cycles == 512);
  CHECK(rep.total_cycles == 2048);
  // Faster dividers recover the overlap.
  cfg.divider_latency_cycles = 8;
  const PerfReport fast = run(dims, cfg);
  CHECK(fast.divider_ok);
  CHECK(fast.total_cycles == 1536);
}

TEST_CASE("multi-head desk check: 128x192x64x3") {
  AcceleratorConfig cfg;
  const AttentionDims dims = make_dims(128, 192, 64, 3);
  const PerfReport rep = run(dims, cfg);
  // Per head: three projections 2 tiles * 768, QK 2*2*256, AV 2*512.
  CHECK(rep.cycles_projections == 3 * 3 * 2 * 768);
  CHECK(rep.cycles_qk == 3 * 4 * 256);
  CHECK(rep.cycles_av == 3 * 2 * 512);
  CHECK(rep.cycles_out_projection == 6 * 768);
  CHECK(rep.total_cycles == 24576);
  CHECK(rep.divider_demand_cycles == 3072);  // 6 windows * 512
  CHECK(rep.divider_span_cycles == 6144);    // 6 windows * (1024 QK+AV)
  CHECK(rep.divider_ok);
  // Every dimension divides the tile size, so utilization is exact.
  CHECK(rep.mac_utilization == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.throughput_tops == doctest::Approx(1.024).epsilon(1e-12));
}

TEST_CASE("padded tiles cost full tile time") {
  AcceleratorConfig cfg;
  const PerfReport tiny = run(make_dims(1, 8, 8, 1), cfg);
  // Each phase still pays one full 256-cycle tile.
  CHECK(tiny.total_cycles == 1536);
  const double useful = 3.0 * 1 * 8 * 8 + 2.0 * 1 * 1 * 8 + 1.0 * 8 * 8;
  CHECK(tiny.mac_utilization ==
        doctest::Approx(useful / (1536.0 * 16 * 64)).epsilon(1e-12));

  const PerfReport odd = run(make_dims(70, 70, 70, 1), cfg);
  // 70 rows split into a full and a padded row block; inner chunks of 70
  // round up to two passes of the 64-deep pipeline.
  CHECK(odd.cycles_projections == 3 * 4 * 512);
  CHECK(odd.cycles_qk == 4 * 512);
  CHECK(odd.cycles_av == 2 * 2 * 512);
  CHECK(odd.cycles_out_projection == 4 * 512);
  CHECK(odd.total_cycles == 12288);
  const double odd_useful = 3.0 * 70 * 70 * 70 + 2.0 * 70.0 * 70 * 70 + 70.0 * 70 * 70;
  CHECK(odd.mac_utilization ==
        doctest::Approx(odd_useful / (12288.0 * 1024)).epsilon(1e-12));
  CHECK(odd.mac_utilization < 0.2);

  // Padding flags land on edge tiles.
  const TileSchedule sched = build_schedule(make_dims(70, 70, 70, 1), cfg);
  bool saw_padded = false;
  for (const TileOp& op : sched.ops) saw_padded = saw_padded || op.padded;
  CHECK(saw_padded);
}

TEST_CASE("phase traffic is cycles times the interface rates") {
  AcceleratorConfig cfg;
  const PerfReport rep = run(make_dims(64, 64, 64, 1), cfg);
  CHECK(rep.traffic_projections.input_bytes == 768 * 64);
  CHECK(rep.traffic_projections.weight_bytes == 768 * 16);
  CHECK(rep.traffic_projections.bias_bytes == 768 * 16);
  CHECK(rep.traffic_projections.output_bytes == 768 * 16);
  CHECK(rep.traffic_projections.partial_sum_bytes == 768 * 96);  // 2*N*D/8
  CHECK(rep.traffic_qk.input_bytes == 256 * 64);
  CHECK(rep.traffic_av.partial_sum_bytes == 256 * 96);
  const std::uint64_t matmul_cycles = 768 + 256 + 256 + 256;
  CHECK(rep.traffic_total.input_bytes == matmul_cycles * 64);
  CHECK(rep.traffic_total.weight_bytes == matmul_cycles * 16);
  CHECK(rep.traffic_total.output_bytes == matmul_cycles * 16);
  CHECK(rep.traffic_total.partial_sum_bytes == matmul_cycles * 96);
}

TEST_CASE("finite drain rate stretches the run") {
  AcceleratorConfig cfg;
  cfg.fifo_depth_bytes = 1024;
  cfg.fifo_drain_bytes_per_cycle = 4.0;
  const AttentionDims dims = make_dims(64, 64, 64, 1);
  const PerfReport rep = run(dims, cfg);
  // 1536 cycles produce 1536*16 bytes; draining (24576 - 1024) at 4 B/cycle
  // needs 5888 cycles, so the FIFO dominates.
  CHECK(rep.total_cycles == 5888);
  CHECK(rep.fifo_stall_cycles == 5888 - 1536);
  CHECK(!rep.violation.empty());
  // A drain at the production rate never stalls.
  cfg.fifo_drain_bytes_per_cycle = 16.0;
  CHECK(run(dims, cfg).fifo_stall_cycles == 0);
}

TEST_CASE("configuration validation") {
  AcceleratorConfig cfg;
  const AttentionDims dims = make_dims(8, 8, 8, 1);
  cfg.n = 0;
  CHECK_THROWS_AS(build_schedule(dims, cfg), std::invalid_argument);
  cfg = AcceleratorConfig{};
  cfg.d = 16;  // must exceed 2*b
  CHECK_THROWS_AS(build_schedule(dims, cfg), std::invalid_argument);
  cfg = AcceleratorConfig{};
  cfg.freq_hz = 0.0;
  CHECK_THROWS_AS(build_schedule(dims, cfg), std::invalid_argument);
  cfg = AcceleratorConfig{};
  CHECK_THROWS_AS(build_schedule(make_dims(0, 8, 8, 1), cfg), std::invalid_argument);
  CHECK_THROWS_AS(build_schedule(make_dims(8, 8, 8, 0), cfg), std::invalid_argument);
  CHECK_THROWS_AS(simulate_perf(TileSchedule{}, cfg), std::invalid_argument);
}
