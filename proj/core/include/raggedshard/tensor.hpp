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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace raggedshard {

/// Element counts and offsets. Expert tensors exceed 2^31 elements.
using Index = std::int64_t;

/// Smallest unit of a tensor that may never be split across devices.
class Granularity {
 public:
  enum class Kind { Element, Rows, Block };

  static Granularity element() { return Granularity(Kind::Element, 1, {}); }
  static Granularity rows(Index n) { return Granularity(Kind::Rows, n, {}); }
  static Granularity block(std::vector<Index> block_shape) {
    return Granularity(Kind::Block, 0, std::move(block_shape));
  }

  Kind kind() const { return kind_; }
  /// Row count for Kind::Rows.
  Index rows() const { return rows_; }
  /// Tile shape for Kind::Block.
  const std::vector<Index>& block_shape() const { return block_shape_; }

  friend bool operator==(const Granularity&, const Granularity&) = default;

 private:
  Granularity(Kind kind, Index rows, std::vector<Index> block_shape)
      : kind_(kind), rows_(rows), block_shape_(std::move(block_shape)) {}

  Kind kind_;
  Index rows_;
  std::vector<Index> block_shape_;
};

struct TensorSpec {
  std::string name;
  std::vector<Index> shape;
  int elem_bytes = 4;
  Granularity granularity = Granularity::element();
  std::size_t order_index = 0;

  Index numel() const;
  std::size_t rank() const { return shape.size(); }
  /// Elements between consecutive indices of dimension `dim` (row-major).
  Index stride(std::size_t dim) const;

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

/// Throws Error(ShapeMismatch) for empty or non-positive shapes.
void check_shape(const TensorSpec& t);

/// Granularity in elements. Throws NonDividingGranularity when the
/// declaration does not tile the tensor exactly.
Index resolve_granularity(const TensorSpec& t);

/// Number of sharding blocks, numel / granularity.
Index block_count(const TensorSpec& t);

/// Effective granularity when `t` (already the local tensor of an outer
/// Shard(dim), dim > 0) is additionally ragged-sharded with `user_granularity`
/// elements: LCM(stride(dim), user_granularity), so no shard boundary ever
/// falls inside one index of `dim`.
Index compose_with_shard(const TensorSpec& t, std::size_t dim,
                         Index user_granularity);

Index gcd(Index a, Index b);
/// Throws LimitExceeded on int64 overflow.
Index lcm(Index a, Index b);
Index ceil_div(Index a, Index b);
Index round_up(Index a, Index multiple);

}  // namespace raggedshard
