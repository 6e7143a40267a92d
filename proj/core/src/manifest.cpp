//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ita/tensor_io.hpp"

namespace ita {

namespace {

std::string format_scale(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_requant(const RequantParams& p) {
  return std::to_string(p.multiplier) + " " + std::to_string(p.right_shift) + " " +
         format_scale(p.output_scale);
}

RequantParams parse_requant(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  long long mult = 0;
  int shift = 0;
  double scale = 0.0;
  if (!(in >> mult >> shift >> scale))
    throw std::runtime_error("manifest: " + key + " must be \"multiplier shift scale\"");
  std::string rest;
  if (in >> rest) throw std::runtime_error("manifest: trailing tokens in " + key);
  RequantParams p;
  p.multiplier = static_cast<std::uint32_t>(mult);
  p.right_shift = shift;
  p.output_scale = scale;
  p.validate();
  return p;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_dim(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("manifest: missing key " + key);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("manifest: " + key + " is not an integer");
  }
}

const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("manifest: missing key " + key);
  return it->second;
}

QuantizedMatrix bias_tensor(const std::vector<std::int8_t>& bias) {
  QuantizedMatrix m(1, static_cast<int>(bias.size()), 1.0);
  m.codes = bias;
  return m;
}

std::vector<std::int8_t> read_bias(const std::filesystem::path& path, int p,
                                   const std::string& name) {
  const QuantizedMatrix m = read_int8_tensor(path);
  if (m.rows != 1 || m.cols != p)
    throw std::runtime_error("manifest: " + name + " must be a 1 x P tensor");
  return m.codes;
}

}  // namespace

void AttentionFixture::validate() const {
  dims.validate();
  weights.validate(dims);
  if (input.rows != dims.s || input.cols != dims.e)
    throw std::runtime_error("fixture: input must be S x E");
  if (golden && (golden->rows != dims.s || golden->cols != dims.e))
    throw std::runtime_error("fixture: golden must be S x E");
}

void write_fixture(const AttentionFixture& f, const std::filesystem::path& dir) {
  f.validate();
  std::filesystem::create_directories(dir);

  write_tensor(dir / "input.itaq", f.input);
  write_tensor(dir / "wo.itaq", f.weights.wo);
  write_tensor(dir / "bo.itaq", bias_tensor(f.weights.bo));
  for (int h = 0; h < f.dims.h; ++h) {
    const HeadWeights& hw = f.weights.heads[static_cast<std::size_t>(h)];
    const std::string stem = "head" + std::to_string(h) + ".";
    write_tensor(dir / (stem + "wq.itaq"), hw.wq);
    write_tensor(dir / (stem + "wk.itaq"), hw.wk);
    write_tensor(dir / (stem + "wv.itaq"), hw.wv);
    write_tensor(dir / (stem + "bq.itaq"), bias_tensor(hw.bq));
    write_tensor(dir / (stem + "bk.itaq"), bias_tensor(hw.bk));
    write_tensor(dir / (stem + "bv.itaq"), bias_tensor(hw.bv));
  }
  if (f.golden) write_tensor(dir / "golden_output.itaq", *f.golden);

  std::ostringstream out;
  out << "version=1\n";
  out << "s=" << f.dims.s << "\ne=" << f.dims.e << "\np=" << f.dims.p << "\nh=" << f.dims.h
      << "\n";
  out << "input=input.itaq\n";
  out << "requant.q=" << format_requant(f.weights.rq_q) << "\n";
  out << "requant.k=" << format_requant(f.weights.rq_k) << "\n";
  out << "requant.v=" << format_requant(f.weights.rq_v) << "\n";
  out << "requant.qk=" << format_requant(f.weights.rq_qk) << "\n";
  out << "requant.av=" << format_requant(f.weights.rq_av) << "\n";
  out << "requant.out=" << format_requant(f.weights.rq_out) << "\n";
  for (int h = 0; h < f.dims.h; ++h) {
    const std::string stem = "head" + std::to_string(h) + ".";
    for (const char* part : {"wq", "wk", "wv", "bq", "bk", "bv"})
      out << stem << part << "=" << stem << part << ".itaq\n";
  }
  out << "wo=wo.itaq\nbo=bo.itaq\n";
  if (f.golden) out << "golden=golden_output.itaq\n";

  std::ofstream file(dir / "manifest.txt", std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  file << out.str();
  if (!file.flush()) throw std::runtime_error("short write to manifest.txt");
}

AttentionFixture read_fixture(const std::filesystem::path& manifest_path) {
  std::ifstream file(manifest_path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + manifest_path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(file, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                               " is not key=value");
    const std::string key = trim(t.substr(0, eq));
    if (kv.count(key))
      throw std::runtime_error("manifest: duplicate key " + key);
    kv[key] = trim(t.substr(eq + 1));
  }

  if (require(kv, "version") != "1")
    throw std::runtime_error("manifest: unsupported version " + kv["version"]);

  AttentionFixture f;
  f.dims.s = parse_dim(kv, "s");
  f.dims.e = parse_dim(kv, "e");
  f.dims.p = parse_dim(kv, "p");
  f.dims.h = parse_dim(kv, "h");
  f.dims.validate();

  std::set<std::string> allowed = {"version", "s",          "e",          "p",
                                   "h",       "input",      "wo",         "bo",
                                   "golden",  "requant.q",  "requant.k",  "requant.v",
                                   "requant.qk", "requant.av", "requant.out"};
  for (int h = 0; h < f.dims.h; ++h)
    for (const char* part : {"wq", "wk", "wv", "bq", "bk", "bv"})
      allowed.insert("head" + std::to_string(h) + "." + part);
  for (const auto& [key, value] : kv)
    if (!allowed.count(key)) throw std::runtime_error("manifest: unknown key " + key);

  const std::filesystem::path dir = manifest_path.parent_path();
  f.input = read_int8_tensor(dir / require(kv, "input"));
  f.weights.rq_q = parse_requant("requant.q", require(kv, "requant.q"));
  f.weights.rq_k = parse_requant("requant.k", require(kv, "requant.k"));
  f.weights.rq_v = parse_requant("requant.v", require(kv, "requant.v"));
  f.weights.rq_qk = parse_requant("requant.qk", require(kv, "requant.qk"));
  f.weights.rq_av = parse_requant("requant.av", require(kv, "requant.av"));
  f.weights.rq_out = parse_requant("requant.out", require(kv, "requant.out"));

  f.weights.heads.resize(static_cast<std::size_t>(f.dims.h));
  for (int h = 0; h < f.dims.h; ++h) {
    HeadWeights& hw = f.weights.heads[static_cast<std::size_t>(h)];
    const std::string stem = "head" + std::to_string(h) + ".";
    hw.wq = read_int8_tensor(dir / require(kv, stem + "wq"));
    hw.wk = read_int8_tensor(dir / require(kv, stem + "wk"));
    hw.wv = read_int8_tensor(dir / require(kv, stem + "wv"));
    hw.bq = read_bias(dir / require(kv, stem + "bq"), f.dims.p, stem + "bq");
    hw.bk = read_bias(dir / require(kv, stem + "bk"), f.dims.p, stem + "bk");
    hw.bv = read_bias(dir / require(kv, stem + "bv"), f.dims.p, stem + "bv");
  }
  f.weights.wo = read_int8_tensor(dir / require(kv, "wo"));
  f.weights.bo = read_bias(dir / require(kv, "bo"), f.dims.e, "bo");
  if (kv.count("golden")) f.golden = read_int8_tensor(dir / kv["golden"]);

  f.validate();
  return f;
}

}  // namespace ita
