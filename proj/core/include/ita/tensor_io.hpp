//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ita/quant.hpp"
#include "ita/softmax.hpp"

namespace ita {

// Binary tensor container. Layout, all little-endian:
//   offset 0:  magic "ITAQ"
//   offset 4:  version u8 (1)
//   offset 5:  element type u8 (0 = int8, 1 = int32 accumulator, 2 = uint8)
//   offset 6:  rows u32
//   offset 10: cols u32
//   offset 14: two zero pad bytes
//   offset 16: row-major payload
//   then:      scale f64 (IEEE-754 bit pattern)
enum class ElementType : std::uint8_t { kInt8 = 0, kAccum32 = 1, kUInt8 = 2 };

std::vector<std::uint8_t> tensor_bytes(const QuantizedMatrix& m);
std::vector<std::uint8_t> tensor_bytes(const AccumMatrix& m, double scale);
std::vector<std::uint8_t> tensor_bytes(const ProbMatrix& m, double scale);

void write_tensor(const std::filesystem::path& path, const QuantizedMatrix& m);
void write_tensor(const std::filesystem::path& path, const AccumMatrix& m, double scale);
void write_tensor(const std::filesystem::path& path, const ProbMatrix& m, double scale);

// Readers throw std::runtime_error naming the file on format or type
// mismatches.
QuantizedMatrix read_int8_tensor(const std::filesystem::path& path);
AccumMatrix read_accum_tensor(const std::filesystem::path& path, double* scale = nullptr);
ProbMatrix read_u8_tensor(const std::filesystem::path& path, double* scale = nullptr);
ElementType peek_element_type(const std::filesystem::path& path);

}  // namespace ita
