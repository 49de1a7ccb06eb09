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

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "raggedshard/tensor.hpp"

namespace raggedshard {

/// Bijection from block index in communication order to block index in the
/// row-major tile grid of the logical tensor, plus the tiling it refers to.
///
/// Blocks are stored contiguously in communication order; within a block,
/// elements follow the row-major order of the tile. For row slabs this is
/// plain row-major memory, for 2D tiles it is the block-major layout.
class BlockPermutation {
 public:
  BlockPermutation() = default;
  /// Throws ShapeMismatch if `perm` is not a bijection onto the tile grid or
  /// the tiling does not divide `tensor_shape`.
  BlockPermutation(std::vector<Index> tensor_shape,
                   std::vector<Index> block_shape, std::vector<Index> perm);

  static BlockPermutation identity(std::vector<Index> tensor_shape,
                                   std::vector<Index> block_shape);

  Index num_blocks() const { return static_cast<Index>(perm_.size()); }
  Index block_elements() const { return block_elements_; }
  Index numel() const { return num_blocks() * block_elements_; }
  const std::vector<Index>& perm() const { return perm_; }
  const std::vector<Index>& tensor_shape() const { return tensor_shape_; }
  const std::vector<Index>& block_shape() const { return block_shape_; }

  Index logical_block(Index comm_block) const { return perm_[comm_block]; }
  /// Logical-block to communication-block map.
  std::vector<Index> inverse() const;
  /// True when communication order equals row-major element order.
  bool is_trivial() const;

  /// Row-major element offset of the element stored at `comm_offset`.
  Index logical_offset(Index comm_offset) const;

  template <class T>
  std::vector<T> to_logical(std::span<const T> comm) const {
    std::vector<T> out(comm.size());
    if (is_trivial()) {
      std::copy(comm.begin(), comm.end(), out.begin());
      return out;
    }
    for (Index c = 0; c < static_cast<Index>(comm.size()); ++c) {
      out[logical_offset(c)] = comm[c];
    }
    return out;
  }

  template <class T>
  std::vector<T> to_comm(std::span<const T> logical) const {
    std::vector<T> out(logical.size());
    if (is_trivial()) {
      std::copy(logical.begin(), logical.end(), out.begin());
      return out;
    }
    for (Index c = 0; c < static_cast<Index>(logical.size()); ++c) {
      out[c] = logical[logical_offset(c)];
    }
    return out;
  }

  friend bool operator==(const BlockPermutation&,
                         const BlockPermutation&) = default;

 private:
  std::vector<Index> tensor_shape_;
  std::vector<Index> block_shape_;
  std::vector<Index> perm_;
  std::vector<Index> grid_;  // tiles per dimension
  Index block_elements_ = 0;
  bool contiguous_tiles_ = true;
};

struct Replicate {
  friend bool operator==(const Replicate&, const Replicate&) = default;
};
struct Partial {
  friend bool operator==(const Partial&, const Partial&) = default;
};
struct Shard {
  std::size_t dim = 0;
  friend bool operator==(const Shard&, const Shard&) = default;
};
/// counts[k] sharding blocks on rank k, in rank order over contiguous memory.
struct RaggedShard {
  std::vector<Index> counts;
  friend bool operator==(const RaggedShard&, const RaggedShard&) = default;
};
/// RaggedShard under an outer even Shard(0); `reshuffle` restores the global
/// row-major order when the full tensor is materialized.
struct StridedRaggedShard {
  std::vector<Index> counts;
  BlockPermutation reshuffle;
  friend bool operator==(const StridedRaggedShard&,
                         const StridedRaggedShard&) = default;
};

using Placement =
    std::variant<Replicate, Partial, Shard, RaggedShard, StridedRaggedShard>;

std::string to_string(const Placement& p);

/// Counts of a RaggedShard or StridedRaggedShard, nullptr otherwise.
const std::vector<Index>* ragged_counts(const Placement& p);

/// Checks the placement invariants against `t`: ragged counts sum to the
/// block count and are non-negative, Shard(dim) is within rank.
void check_placement(const TensorSpec& t, const Placement& p);

/// RaggedShard that places every block on `root` of a `ranks`-sized mesh dim.
RaggedShard all_on_root(Index blocks, int ranks, int root);

/// Tiling used by the communication layout of `t`. Identity permutation;
/// non-trivial element order only for Block granularity with real 2D tiles.
BlockPermutation block_layout(const TensorSpec& t);

/// Placement for a tensor whose dim 0 is first evenly split `outer_size` ways
/// and whose local tensors are then ragged-sharded with `counts` blocks per
/// inner rank. The granularity of `t` is resolved against the local tensor.
StridedRaggedShard make_strided(const TensorSpec& t, Index outer_size,
                                std::span<const Index> counts);

}  // namespace raggedshard
