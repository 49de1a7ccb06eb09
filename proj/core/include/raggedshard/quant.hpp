// Copyright 2026 The RaggedShard Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "raggedshard/planner.hpp"

namespace raggedshard {

/// Tile shape of block-wise quantization over the logical matrix view of a
/// tensor (dim 0 by the product of the remaining dims; 1D tensors are a
/// single row). Edge tiles may be smaller.
struct QuantBlockSpec {
  Index rows = 32;
  Index cols = 32;
};

/// Codes follow the shard's element order; scales follow the row-major order
/// of the tiles contained in the shard.
struct QuantizedShard {
  std::vector<std::int8_t> codes;
  std::vector<float> scales;
};

/// Absmax 8-bit quantization of the row-major element range
/// [begin, begin + shard.size()) of a tensor of `shape`. Throws
/// MisalignedShard when a tile straddles either end of the shard.
QuantizedShard blockwise_quantize(std::span<const float> shard,
                                  std::span<const Index> shape, Index begin,
                                  const QuantBlockSpec& spec = {});

std::vector<float> blockwise_dequantize(const QuantizedShard& q,
                                        std::span<const Index> shape, Index begin,
                                        const QuantBlockSpec& spec = {});

struct QuantError {
  /// max |x - code * scale| in exact arithmetic (double).
  double max_error = 0.0;
  /// Largest half step, max scale / 2.
  double bound = 0.0;
  /// Every element is within half of its own tile's step.
  bool within = true;
};

QuantError quantization_error(std::span<const float> shard, const QuantizedShard& q,
                              std::span<const Index> shape, Index begin,
                              const QuantBlockSpec& spec = {});

struct OffendingBlock {
  std::string tensor;
  Index block_row = 0;
  Index block_col = 0;
  /// First device boundary k (offset k*S) the tile crosses.
  Index boundary = 0;

  friend bool operator==(const OffendingBlock&, const OffendingBlock&) = default;
};

struct ContainmentReport {
  bool contained = true;
  std::vector<OffendingBlock> offending;
};

/// True iff every tile of every listed tensor lands on a single device of
/// `plan`. Tensors absent from `specs` are not checked.
ContainmentReport containment_check(const LayoutPlan& plan,
                                    const std::map<std::string, QuantBlockSpec>& specs);

}  // namespace raggedshard
