//
// Copyright © 2026 the ita-sim authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <vector>

#include "ita/manifest.hpp"

namespace ita {

// Plain-loop integer reference for the full attention pipeline, written
// independently of the tiled engine and the streaming state machine so the
// two implementations can cross-check each other. Shares only the scalar
// requantize definition. Deliberately sequential and simple.
QuantizedMatrix naive_reference_attention(const AttentionFixture& f,
                                          const AcceleratorConfig& cfg,
                                          std::vector<ProbMatrix>* probs_out = nullptr);

}  // namespace ita
