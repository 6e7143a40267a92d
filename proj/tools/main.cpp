//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: softmax sweeps, attention runs, performance
// reports, and fixture generation. Exit codes: 0 success, 1 runtime or
// data error, 2 usage or validation error.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ita/harness.hpp"
#include "ita/naive.hpp"
#include "ita/perf.hpp"
#include "ita/tensor_io.hpp"

namespace {

// Expands "--config FILE" into "--key=value" tokens for every file entry
// whose flag is not already on the command line, so explicit flags always
// win. Files hold one KEY=VALUE per line; '#' starts a comment. Unknown
// keys surface as unexpected-argument parse errors.
std::vector<std::string> expand_config_args(std::vector<std::string> tokens,
                                            const std::vector<std::string>& subcommands) {
  if (tokens.empty() ||
      std::find(subcommands.begin(), subcommands.end(), tokens.front()) ==
          subcommands.end())
    return tokens;
  std::string file;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (tokens[i] == "--config") {
      if (i + 1 >= tokens.size()) return tokens;  // parser reports the miss
      if (!file.empty()) throw std::invalid_argument("--config given twice");
      file = tokens[i + 1];
      ++i;
    } else if (tokens[i].rfind("--config=", 0) == 0) {
      if (!file.empty()) throw std::invalid_argument("--config given twice");
      file = tokens[i].substr(9);
    }
  }
  if (file.empty()) return tokens;

  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot read config file " + file);
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  const auto given_explicitly = [&](const std::string& flag) {
    for (std::size_t i = 1; i < tokens.size(); ++i)
      if (tokens[i] == flag || tokens[i].rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> injected;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " is not KEY=VALUE: " + t);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "config")
      throw std::invalid_argument("config files cannot chain other config files");
    if (given_explicitly("--" + key)) continue;
    injected.push_back("--" + key + "=" + value);
  }
  tokens.insert(tokens.begin() + 1, injected.begin(), injected.end());
  return tokens;
}

ita::AttentionDims parse_dims(const std::string& text) {
  ita::AttentionDims dims;
  int parsed = 0;
  if (std::sscanf(text.c_str(), "%dx%dx%dx%d%n", &dims.s, &dims.e, &dims.p, &dims.h,
                  &parsed) != 4 ||
      parsed != static_cast<int>(text.size()))
    throw std::invalid_argument("dims must look like SxExPxH, e.g. 64x64x64x1");
  dims.validate();
  return dims;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw std::runtime_error("short write to " + path.string());
}

struct CfgFlags {
  int n = 16;
  int m = 64;
  int d = 24;
  int b = 8;
  double freq = 500e6;
  int divider_latency = 16;
  int divider_count = 2;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n, "processing element count");
    cmd->add_option("--m", m, "dot product width and tile edge");
    cmd->add_option("--d", d, "accumulator bits");
    cmd->add_option("--b", b, "activation bits");
    cmd->add_option("--freq", freq, "clock frequency in Hz");
    cmd->add_option("--divider-latency", divider_latency, "serial divider latency, cycles");
    cmd->add_option("--divider-count", divider_count, "number of serial dividers");
  }

  ita::AcceleratorConfig to_config() const {
    ita::AcceleratorConfig cfg;
    cfg.n = n;
    cfg.m = m;
    cfg.d = d;
    cfg.b = b;
    cfg.freq_hz = freq;
    cfg.divider_latency_cycles = divider_latency;
    cfg.divider_count = divider_count;
    cfg.validate();
    return cfg;
  }
};

struct SoftmaxEvalArgs {
  std::uint64_t seed = 42;
  int rows = 0;
  int len = 0;
  std::string dist = "gaussian:0,40";
  std::string out = "softmax_report.json";
  int m = 64;
  int b = 8;
};

void run_softmax_eval(const SoftmaxEvalArgs& a) {
  ita::ExperimentSpec spec;
  spec.seed = a.seed;
  spec.repetitions = a.rows;
  spec.dims.s = a.len;
  spec.cfg.m = a.m;
  spec.cfg.b = a.b;
  spec.dist = ita::InputDistribution::parse(a.dist);
  spec.validate();

  const ita::ErrorReport rep = ita::run_softmax_sweep(spec);
  write_text(a.out, ita::to_json(rep, spec));
  std::printf("softmax-eval: mae=%.6g max_abs_err=%.6g samples=%llu report=%s\n",
              rep.softmax_mae, rep.softmax_max_abs_err,
              static_cast<unsigned long long>(rep.samples), a.out.c_str());
}

struct AttentionRunArgs {
  std::string manifest;
  std::string dims;
  std::uint64_t seed = 42;
  std::string out_dir = ".";
  bool dump_probs = false;
  std::string report;
  bool no_overlap = false;
  CfgFlags cfg;
};

void run_attention(const AttentionRunArgs& a) {
  if (!a.manifest.empty() && !a.dims.empty())
    throw std::invalid_argument("give either --manifest or --dims, not both");
  if (a.manifest.empty() && a.dims.empty())
    throw std::invalid_argument("one of --manifest or --dims is required");

  const ita::AcceleratorConfig cfg = a.cfg.to_config();
  ita::AttentionFixture fixture = a.manifest.empty()
                                      ? ita::make_fixture(a.seed, parse_dims(a.dims), cfg)
                                      : ita::read_fixture(a.manifest);

  ita::AttentionOptions opt;
  opt.fused = true;
  opt.keep_probs = a.dump_probs;
  const ita::AttentionOutput result =
      ita::multi_head_attention(fixture.input, fixture.weights, cfg, fixture.dims, opt);

  const auto timing =
      a.no_overlap ? ita::SoftmaxTiming::kSerialized : ita::SoftmaxTiming::kOverlapped;
  const ita::TileSchedule sched = ita::build_schedule(fixture.dims, cfg, timing);
  const ita::PerfReport perf = ita::simulate_perf(sched, cfg);

  std::string golden_note = "absent";
  if (fixture.golden) {
    const bool match = fixture.golden->codes == result.output.codes;
    golden_note = match ? "match" : "MISMATCH";
    if (!match) {
      std::filesystem::create_directories(a.out_dir);
      ita::write_tensor(std::filesystem::path(a.out_dir) / "output.itaq", result.output);
      throw std::runtime_error("output does not match the fixture golden (wrote output.itaq)");
    }
  }

  std::filesystem::create_directories(a.out_dir);
  ita::write_tensor(std::filesystem::path(a.out_dir) / "output.itaq", result.output);
  if (a.dump_probs)
    for (int h = 0; h < fixture.dims.h; ++h)
      ita::write_tensor(std::filesystem::path(a.out_dir) /
                            ("probs_head" + std::to_string(h) + ".itaq"),
                        result.probs[static_cast<std::size_t>(h)], 1.0 / 255.0);
  if (!a.report.empty())
    write_text(a.report, ita::to_json(perf, cfg, fixture.dims));

  std::printf(
      "attention-run: dims=%dx%dx%dx%d cycles=%llu utilization=%.4f tops=%.4f "
      "golden=%s out=%s\n",
      fixture.dims.s, fixture.dims.e, fixture.dims.p, fixture.dims.h,
      static_cast<unsigned long long>(perf.total_cycles), perf.mac_utilization,
      perf.throughput_tops, golden_note.c_str(), a.out_dir.c_str());
}

struct PerfReportArgs {
  std::string dims = "64x64x64x1";
  bool compare_dataflow = false;
  bool no_overlap = false;
  std::string out;
  CfgFlags cfg;
};

void run_perf_report(const PerfReportArgs& a) {
  const ita::AcceleratorConfig cfg = a.cfg.to_config();
  const ita::AttentionDims dims = parse_dims(a.dims);

  if (a.compare_dataflow) {
    std::printf("%-6s %-12s %-12s %s\n", "N", "ws_bits", "os_bits", "os/ws");
    for (const int n : {4, 8, 16, 32}) {
      ita::AcceleratorConfig c = cfg;
      c.n = n;
      const auto ws = ita::bandwidth_weight_stationary(c);
      const auto os = ita::bandwidth_output_stationary(c);
      std::printf("%-6d %-12llu %-12llu %.3f\n", n, static_cast<unsigned long long>(ws),
                  static_cast<unsigned long long>(os),
                  static_cast<double>(os) / static_cast<double>(ws));
    }
  }

  const auto timing =
      a.no_overlap ? ita::SoftmaxTiming::kSerialized : ita::SoftmaxTiming::kOverlapped;
  const ita::TileSchedule sched = ita::build_schedule(dims, cfg, timing);
  const ita::PerfReport rep = ita::simulate_perf(sched, cfg);
  const std::string json = ita::to_json(rep, cfg, dims);
  if (a.out.empty()) {
    std::fputs(json.c_str(), stdout);
  } else {
    write_text(a.out, json);
  }
  std::fprintf(stderr,
               "perf-report: ws=%llu bits/cycle os=%llu bits/cycle tops=%.4f cycles=%llu\n",
               static_cast<unsigned long long>(rep.bandwidth_ws_bits),
               static_cast<unsigned long long>(rep.bandwidth_os_bits), rep.throughput_tops,
               static_cast<unsigned long long>(rep.total_cycles));
}

struct GenFixtureArgs {
  std::uint64_t seed = 0;
  std::string dims;
  std::string out_dir;
  bool emit_golden = true;
  CfgFlags cfg;
};

void run_gen_fixture(const GenFixtureArgs& a) {
  const ita::AcceleratorConfig cfg = a.cfg.to_config();
  ita::AttentionFixture fixture = ita::make_fixture(a.seed, parse_dims(a.dims), cfg);
  if (a.emit_golden) fixture.golden = ita::naive_reference_attention(fixture, cfg);
  ita::write_fixture(fixture, a.out_dir);
  std::printf("gen-fixture: wrote %s (seed=%llu dims=%s golden=%s)\n", a.out_dir.c_str(),
              static_cast<unsigned long long>(a.seed), a.dims.c_str(),
              a.emit_golden ? "yes" : "no");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"integer transformer attention simulator"};
  app.require_subcommand(1);
  std::string config_file;  // consumed by expand_config_args before parsing

  SoftmaxEvalArgs se;
  CLI::App* eval = app.add_subcommand("softmax-eval", "streaming softmax error sweep");
  eval->add_option("--seed", se.seed, "sweep seed")->capture_default_str();
  eval->add_option("--rows", se.rows, "number of rows")->required();
  eval->add_option("--len", se.len, "row length")->required();
  eval->add_option("--dist", se.dist, "input distribution")->capture_default_str();
  eval->add_option("--out", se.out, "report path")->capture_default_str();
  eval->add_option("--m", se.m, "streaming part width")->capture_default_str();
  eval->add_option("--b", se.b, "code bits")->capture_default_str();
  eval->add_option("--config", config_file, "key=value file applied beneath explicit flags");
  eval->callback([&] { run_softmax_eval(se); });

  AttentionRunArgs ar;
  CLI::App* attn = app.add_subcommand("attention-run", "run the attention pipeline");
  attn->add_option("--manifest", ar.manifest, "fixture manifest path");
  attn->add_option("--dims", ar.dims, "SxExPxH for a generated workload");
  attn->add_option("--seed", ar.seed, "seed for a generated workload")->capture_default_str();
  attn->add_option("--out-dir", ar.out_dir, "output directory")->capture_default_str();
  attn->add_flag("--dump-probs", ar.dump_probs, "also write per-head probability tensors");
  attn->add_option("--report", ar.report, "write a performance report JSON here");
  attn->add_flag("--no-softmax-overlap", ar.no_overlap,
                 "serialize softmax work instead of overlapping it");
  ar.cfg.attach(attn);
  attn->add_option("--config", config_file, "key=value file applied beneath explicit flags");
  attn->callback([&] { run_attention(ar); });

  PerfReportArgs pr;
  CLI::App* perf = app.add_subcommand("perf-report", "analytical performance model");
  perf->add_option("--dims", pr.dims, "SxExPxH workload")->capture_default_str();
  perf->add_flag("--compare-dataflow", pr.compare_dataflow,
                 "print the weight- vs output-stationary bandwidth table");
  perf->add_flag("--no-softmax-overlap", pr.no_overlap,
                 "serialize softmax work instead of overlapping it");
  perf->add_option("--out", pr.out, "report path (default stdout)");
  pr.cfg.attach(perf);
  perf->add_option("--config", config_file, "key=value file applied beneath explicit flags");
  perf->callback([&] { run_perf_report(pr); });

  GenFixtureArgs gf;
  CLI::App* gen = app.add_subcommand("gen-fixture", "write a deterministic workload to disk");
  gen->add_option("--seed", gf.seed, "fixture seed")->required();
  gen->add_option("--dims", gf.dims, "SxExPxH")->required();
  gen->add_option("--out-dir", gf.out_dir, "fixture directory")->required();
  gen->add_flag("--emit-golden,!--no-golden", gf.emit_golden,
                "also compute and store the reference output");
  gf.cfg.attach(gen);
  gen->add_option("--config", config_file, "key=value file applied beneath explicit flags");
  gen->callback([&] { run_gen_fixture(gf); });

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config_args(
        std::move(args), {"softmax-eval", "attention-run", "perf-report", "gen-fixture"});
    std::reverse(args.begin(), args.end());  // CLI11 consumes back to front
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::fprintf(stderr, "%s", app.help().c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
