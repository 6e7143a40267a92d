//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include <json.hpp>

#include "ita/harness.hpp"
#include "ita/perf.hpp"

namespace ita {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json traffic_json(const PhaseTraffic& t) {
  return ordered_json{{"input_bytes", t.input_bytes},
                      {"weight_bytes", t.weight_bytes},
                      {"bias_bytes", t.bias_bytes},
                      {"output_bytes", t.output_bytes},
                      {"partial_sum_bytes", t.partial_sum_bytes}};
}

ordered_json config_json(const AcceleratorConfig& cfg) {
  return ordered_json{{"n", cfg.n},
                      {"m", cfg.m},
                      {"d", cfg.d},
                      {"b", cfg.b},
                      {"freq_hz", cfg.freq_hz},
                      {"divider_latency_cycles", cfg.divider_latency_cycles},
                      {"divider_count", cfg.divider_count}};
}

ordered_json dims_json(const AttentionDims& dims) {
  return ordered_json{{"s", dims.s}, {"e", dims.e}, {"p", dims.p}, {"h", dims.h}};
}

}  // namespace

std::string to_json(const PerfReport& rep, const AcceleratorConfig& cfg,
                    const AttentionDims& dims) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "perf_report";
  j["config"] = config_json(cfg);
  j["dims"] = dims_json(dims);
  j["total_cycles"] = rep.total_cycles;
  j["cycles_per_phase"] = ordered_json{{"projections", rep.cycles_projections},
                                       {"qk", rep.cycles_qk},
                                       {"av", rep.cycles_av},
                                       {"out_projection", rep.cycles_out_projection}};
  j["softmax_stall_cycles"] = rep.softmax_stall_cycles;
  j["fifo_stall_cycles"] = rep.fifo_stall_cycles;
  j["divider_demand_cycles"] = rep.divider_demand_cycles;
  j["divider_span_cycles"] = rep.divider_span_cycles;
  j["divider_ok"] = rep.divider_ok;
  j["violation"] = rep.violation;
  j["mac_utilization"] = rep.mac_utilization;
  j["throughput_tops"] = rep.throughput_tops;
  j["bandwidth_ws_bits"] = rep.bandwidth_ws_bits;
  j["bandwidth_os_bits"] = rep.bandwidth_os_bits;
  j["weight_buffer_bytes"] = rep.weight_buffer_bytes;
  j["traffic"] = ordered_json{{"projections", traffic_json(rep.traffic_projections)},
                              {"qk", traffic_json(rep.traffic_qk)},
                              {"av", traffic_json(rep.traffic_av)},
                              {"out_projection", traffic_json(rep.traffic_out_projection)},
                              {"total", traffic_json(rep.traffic_total)}};
  return j.dump(2) + "\n";
}

std::string to_json(const ErrorReport& rep, const ExperimentSpec& spec) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "error_report";
  j["seed"] = spec.seed;
  j["distribution"] = spec.dist.describe();
  j["rows"] = spec.repetitions;
  j["row_length"] = spec.dims.s;
  j["part_width"] = spec.cfg.m;
  j["mae"] = rep.softmax_mae;
  j["max_abs_err"] = rep.softmax_max_abs_err;
  j["end_to_end_output_mae"] = rep.end_to_end_output_mae;
  j["samples"] = rep.samples;
  j["histogram"] = ordered_json{{"lt_1e-5", rep.histogram[0]},
                                {"1e-5_to_1e-4", rep.histogram[1]},
                                {"1e-4_to_1e-3", rep.histogram[2]},
                                {"1e-3_to_1e-2", rep.histogram[3]},
                                {"1e-2_to_1e-1", rep.histogram[4]},
                                {"ge_1e-1", rep.histogram[5]}};
  return j.dump(2) + "\n";
}

std::string to_json(const SuiteResult& result) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "equivalence_suite";
  j["all_passed"] = result.all_passed();
  ordered_json props = ordered_json::array();
  for (const auto& p : result.properties) {
    ordered_json e;
    e["name"] = p.name;
    e["cases"] = p.cases;
    e["failures"] = p.failures;
    if (p.failures > 0) e["first_failure_seed"] = p.first_failure_seed;
    props.push_back(e);
  }
  j["properties"] = props;
  return j.dump(2) + "\n";
}

}  // namespace ita
