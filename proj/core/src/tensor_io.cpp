//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "ita/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ita {

namespace {

constexpr std::size_t kHeaderSize = 16;

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f64le(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

std::vector<std::uint8_t> header(ElementType type, std::uint32_t rows, std::uint32_t cols) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize);
  out.push_back('I');
  out.push_back('T');
  out.push_back('A');
  out.push_back('Q');
  out.push_back(1);  // version
  out.push_back(static_cast<std::uint8_t>(type));
  put_u32le(out, rows);
  put_u32le(out, cols);
  out.push_back(0);
  out.push_back(0);
  return out;
}

struct RawTensor {
  ElementType type;
  std::uint32_t rows;
  std::uint32_t cols;
  std::vector<std::uint8_t> payload;
  double scale;
};

RawTensor read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tensor read: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderSize + 8)
    throw std::runtime_error("tensor read: truncated file " + path.string());
  if (bytes[0] != 'I' || bytes[1] != 'T' || bytes[2] != 'A' || bytes[3] != 'Q')
    throw std::runtime_error("tensor read: bad magic in " + path.string());
  if (bytes[4] != 1)
    throw std::runtime_error("tensor read: unsupported version in " + path.string());
  if (bytes[5] > 2)
    throw std::runtime_error("tensor read: unknown element type in " + path.string());
  RawTensor t;
  t.type = static_cast<ElementType>(bytes[5]);
  auto u32 = [&bytes](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) |
           (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
  };
  t.rows = u32(6);
  t.cols = u32(10);
  const std::size_t elem_size = t.type == ElementType::kAccum32 ? 4 : 1;
  const std::size_t payload = static_cast<std::size_t>(t.rows) * t.cols * elem_size;
  if (bytes.size() != kHeaderSize + payload + 8)
    throw std::runtime_error("tensor read: size mismatch in " + path.string());
  t.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + payload);
  std::uint64_t sbits = 0;
  for (int i = 0; i < 8; ++i)
    sbits |= static_cast<std::uint64_t>(bytes[kHeaderSize + payload + i]) << (8 * i);
  t.scale = std::bit_cast<double>(sbits);
  return t;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("tensor write: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("tensor write: short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> tensor_bytes(const QuantizedMatrix& m) {
  auto out = header(ElementType::kInt8, static_cast<std::uint32_t>(m.rows),
                    static_cast<std::uint32_t>(m.cols));
  for (const std::int8_t c : m.codes) out.push_back(static_cast<std::uint8_t>(c));
  put_f64le(out, m.scale);
  return out;
}

std::vector<std::uint8_t> tensor_bytes(const AccumMatrix& m, double scale) {
  auto out = header(ElementType::kAccum32, static_cast<std::uint32_t>(m.rows),
                    static_cast<std::uint32_t>(m.cols));
  for (const std::int32_t v : m.values) {
    const std::uint32_t u = static_cast<std::uint32_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
  }
  put_f64le(out, scale);
  return out;
}

std::vector<std::uint8_t> tensor_bytes(const ProbMatrix& m, double scale) {
  auto out = header(ElementType::kUInt8, static_cast<std::uint32_t>(m.rows),
                    static_cast<std::uint32_t>(m.cols));
  out.insert(out.end(), m.values.begin(), m.values.end());
  put_f64le(out, scale);
  return out;
}

void write_tensor(const std::filesystem::path& path, const QuantizedMatrix& m) {
  write_bytes(path, tensor_bytes(m));
}
void write_tensor(const std::filesystem::path& path, const AccumMatrix& m, double scale) {
  write_bytes(path, tensor_bytes(m, scale));
}
void write_tensor(const std::filesystem::path& path, const ProbMatrix& m, double scale) {
  write_bytes(path, tensor_bytes(m, scale));
}

QuantizedMatrix read_int8_tensor(const std::filesystem::path& path) {
  const RawTensor t = read_raw(path);
  if (t.type != ElementType::kInt8)
    throw std::runtime_error("tensor read: " + path.string() + " is not an int8 tensor");
  QuantizedMatrix m(static_cast<int>(t.rows), static_cast<int>(t.cols), t.scale);
  for (std::size_t i = 0; i < t.payload.size(); ++i)
    m.codes[i] = static_cast<std::int8_t>(t.payload[i]);
  return m;
}

AccumMatrix read_accum_tensor(const std::filesystem::path& path, double* scale) {
  const RawTensor t = read_raw(path);
  if (t.type != ElementType::kAccum32)
    throw std::runtime_error("tensor read: " + path.string() + " is not an accumulator tensor");
  AccumMatrix m(static_cast<int>(t.rows), static_cast<int>(t.cols));
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const std::size_t off = 4 * i;
    const std::uint32_t u = static_cast<std::uint32_t>(t.payload[off]) |
                            (static_cast<std::uint32_t>(t.payload[off + 1]) << 8) |
                            (static_cast<std::uint32_t>(t.payload[off + 2]) << 16) |
                            (static_cast<std::uint32_t>(t.payload[off + 3]) << 24);
    m.values[i] = static_cast<std::int32_t>(u);
  }
  if (scale != nullptr) *scale = t.scale;
  return m;
}

ProbMatrix read_u8_tensor(const std::filesystem::path& path, double* scale) {
  const RawTensor t = read_raw(path);
  if (t.type != ElementType::kUInt8)
    throw std::runtime_error("tensor read: " + path.string() + " is not a uint8 tensor");
  ProbMatrix m(static_cast<int>(t.rows), static_cast<int>(t.cols));
  m.values.assign(t.payload.begin(), t.payload.end());
  if (scale != nullptr) *scale = t.scale;
  return m;
}

ElementType peek_element_type(const std::filesystem::path& path) {
  return read_raw(path).type;
}

}  // namespace ita
