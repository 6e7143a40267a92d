//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <filesystem>
#include <optional>

#include "ita/attention.hpp"

namespace ita {

// A self-contained attention workload on disk: a manifest of key=value
// lines next to one tensor file per matrix.
struct AttentionFixture {
  AttentionDims dims;
  QuantizedMatrix input;
  WeightSet weights;
  std::optional<QuantizedMatrix> golden;  // committed reference output

  void validate() const;
};

// Writes manifest.txt and every tensor into dir (created if missing).
// Validates before touching the filesystem.
void write_fixture(const AttentionFixture& f, const std::filesystem::path& dir);

// Loads the fixture whose manifest lives at manifest_path. Unknown or
// missing keys, bad shapes and unreadable tensors all throw with the
// offending key or file named.
AttentionFixture read_fixture(const std::filesystem::path& manifest_path);

}  // namespace ita
