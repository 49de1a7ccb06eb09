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

#include "raggedshard/placement.hpp"

#include <algorithm>
#include <numeric>

#include "raggedshard/error.hpp"

namespace raggedshard {

namespace {

std::string join(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// Tile shape of the contiguous unit for Element/Rows granularity.
std::vector<Index> contiguous_tile(const TensorSpec& t, Index rows) {
  std::vector<Index> tile(t.shape.begin(), t.shape.end());
  tile[0] = rows;
  return tile;
}

}  // namespace

BlockPermutation::BlockPermutation(std::vector<Index> tensor_shape,
                                   std::vector<Index> block_shape,
                                   std::vector<Index> perm)
    : tensor_shape_(std::move(tensor_shape)),
      block_shape_(std::move(block_shape)),
      perm_(std::move(perm)) {
  if (tensor_shape_.size() != block_shape_.size() || tensor_shape_.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "block rank differs from tensor");
  }
  Index tiles = 1;
  block_elements_ = 1;
  grid_.resize(tensor_shape_.size());
  for (std::size_t d = 0; d < tensor_shape_.size(); ++d) {
    if (block_shape_[d] < 1 || tensor_shape_[d] % block_shape_[d] != 0) {
      throw Error(ErrorCode::ShapeMismatch, "tile does not divide tensor");
    }
    grid_[d] = tensor_shape_[d] / block_shape_[d];
    tiles *= grid_[d];
    block_elements_ *= block_shape_[d];
  }
  if (static_cast<Index>(perm_.size()) != tiles) {
    throw Error(ErrorCode::ShapeMismatch,
                "permutation size " + std::to_string(perm_.size()) +
                    " != tile count " + std::to_string(tiles));
  }
  std::vector<bool> seen(perm_.size(), false);
  for (Index p : perm_) {
    if (p < 0 || p >= tiles || seen[p]) {
      throw Error(ErrorCode::ShapeMismatch, "permutation is not a bijection");
    }
    seen[p] = true;
  }
  // A tile is a contiguous row-major run iff it is [1,..,1,b_k,s_{k+1},..].
  std::size_t k = 0;
  while (k < block_shape_.size() && block_shape_[k] == 1) ++k;
  contiguous_tiles_ = true;
  for (std::size_t d = k + 1; d < block_shape_.size(); ++d) {
    if (block_shape_[d] != tensor_shape_[d]) contiguous_tiles_ = false;
  }
}

BlockPermutation BlockPermutation::identity(std::vector<Index> tensor_shape,
                                            std::vector<Index> block_shape) {
  Index tiles = 1;
  for (std::size_t d = 0; d < tensor_shape.size() && d < block_shape.size();
       ++d) {
    tiles *= block_shape[d] > 0 ? tensor_shape[d] / block_shape[d] : 0;
  }
  std::vector<Index> perm(static_cast<std::size_t>(std::max<Index>(tiles, 0)));
  std::iota(perm.begin(), perm.end(), Index{0});
  return BlockPermutation(std::move(tensor_shape), std::move(block_shape),
                          std::move(perm));
}

std::vector<Index> BlockPermutation::inverse() const {
  std::vector<Index> inv(perm_.size());
  for (std::size_t k = 0; k < perm_.size(); ++k) inv[perm_[k]] = Index(k);
  return inv;
}

bool BlockPermutation::is_trivial() const {
  if (!contiguous_tiles_) return false;
  for (std::size_t k = 0; k < perm_.size(); ++k) {
    if (perm_[k] != Index(k)) return false;
  }
  return true;
}

Index BlockPermutation::logical_offset(Index comm_offset) const {
  const Index block = perm_[comm_offset / block_elements_];
  Index intra = comm_offset % block_elements_;
  Index tile = block;
  Index offset = 0;
  Index stride = 1;
  for (std::size_t d = tensor_shape_.size(); d-- > 0;) {
    const Index tile_coord = tile % grid_[d];
    tile /= grid_[d];
    const Index intra_coord = intra % block_shape_[d];
    intra /= block_shape_[d];
    offset += (tile_coord * block_shape_[d] + intra_coord) * stride;
    stride *= tensor_shape_[d];
  }
  return offset;
}

std::string to_string(const Placement& p) {
  struct Visitor {
    std::string operator()(const Replicate&) const { return "Replicate"; }
    std::string operator()(const Partial&) const { return "Partial"; }
    std::string operator()(const Shard& s) const {
      return "Shard(" + std::to_string(s.dim) + ")";
    }
    std::string operator()(const RaggedShard& r) const {
      return "RaggedShard(" + join(r.counts) + ")";
    }
    std::string operator()(const StridedRaggedShard& r) const {
      return "StridedRaggedShard(" + join(r.counts) + ")";
    }
  };
  return std::visit(Visitor{}, p);
}

const std::vector<Index>* ragged_counts(const Placement& p) {
  if (const auto* r = std::get_if<RaggedShard>(&p)) return &r->counts;
  if (const auto* s = std::get_if<StridedRaggedShard>(&p)) return &s->counts;
  return nullptr;
}

void check_placement(const TensorSpec& t, const Placement& p) {
  if (const auto* s = std::get_if<Shard>(&p)) {
    if (s->dim >= t.rank()) {
      throw Error(ErrorCode::ShapeMismatch,
                  t.name + ": Shard dim out of range");
    }
    return;
  }
  if (std::holds_alternative<RaggedShard>(p)) {
    const auto& counts = std::get<RaggedShard>(p).counts;
    Index total = 0;
    for (Index c : counts) {
      if (c < 0) throw Error(ErrorCode::ShapeMismatch, "negative count");
      total += c;
    }
    if (total != block_count(t)) {
      throw Error(ErrorCode::ShapeMismatch,
                  t.name + ": ragged counts sum to " + std::to_string(total) +
                      ", tensor has " + std::to_string(block_count(t)) +
                      " blocks");
    }
  }
  if (const auto* s = std::get_if<StridedRaggedShard>(&p)) {
    if (s->reshuffle.tensor_shape() != t.shape) {
      throw Error(ErrorCode::ShapeMismatch,
                  t.name + ": reshuffle refers to another shape");
    }
  }
}

RaggedShard all_on_root(Index blocks, int ranks, int root) {
  RaggedShard r;
  r.counts.assign(static_cast<std::size_t>(ranks), 0);
  r.counts[static_cast<std::size_t>(root)] = blocks;
  return r;
}

BlockPermutation block_layout(const TensorSpec& t) {
  const Index g = resolve_granularity(t);
  switch (t.granularity.kind()) {
    case Granularity::Kind::Block:
      return BlockPermutation::identity(t.shape, t.granularity.block_shape());
    case Granularity::Kind::Rows:
      return BlockPermutation::identity(t.shape,
                                        contiguous_tile(t, t.granularity.rows()));
    case Granularity::Kind::Element: {
      std::vector<Index> ones(t.rank(), 1);
      (void)g;
      return BlockPermutation::identity(t.shape, std::move(ones));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown granularity kind");
}

StridedRaggedShard make_strided(const TensorSpec& t, Index outer_size,
                                std::span<const Index> counts) {
  check_shape(t);
  if (outer_size < 1 || t.shape[0] % outer_size != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                t.name + ": outer Shard(0) does not evenly split dim 0");
  }
  TensorSpec local = t;
  local.shape[0] = t.shape[0] / outer_size;
  const BlockPermutation local_tiles = block_layout(local);
  const Index local_blocks = local_tiles.num_blocks();

  Index total = 0;
  for (Index c : counts) {
    if (c < 0) throw Error(ErrorCode::ShapeMismatch, "negative count");
    total += c;
  }
  if (total != local_blocks) {
    throw Error(ErrorCode::ShapeMismatch,
                t.name + ": counts sum to " + std::to_string(total) +
                    ", local tensor has " + std::to_string(local_blocks) +
                    " blocks");
  }

  // Communication order is inner-rank major: every inner rank holds its
  // ragged range of each outer shard, outer shards in order.
  std::vector<Index> perm;
  perm.reserve(static_cast<std::size_t>(local_blocks * outer_size));
  Index start = 0;
  for (Index c : counts) {
    for (Index o = 0; o < outer_size; ++o) {
      for (Index j = start; j < start + c; ++j) {
        perm.push_back(o * local_blocks + j);
      }
    }
    start += c;
  }

  StridedRaggedShard out;
  out.counts.assign(counts.begin(), counts.end());
  out.reshuffle =
      BlockPermutation(t.shape, local_tiles.block_shape(), std::move(perm));
  return out;
}

}  // namespace raggedshard
