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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "raggedshard/placement.hpp"
#include "raggedshard/planner.hpp"
#include "raggedshard/simmesh.hpp"

namespace raggedshard {

/// Piece of one tensor stored on one device. `tensor_offset` is the offset
/// of the first element inside the tensor's communication layout.
struct Segment {
  Index device = 0;
  Index local_offset = 0;
  Index length = 0;
  Index tensor_offset = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ZeroOp {};
struct ScaleOp {
  float c = 1.0f;
};
class DBuffer;
struct AddFromOp {
  const DBuffer* other = nullptr;
};
using GroupedOp = std::variant<ZeroOp, ScaleOp, AddFromOp>;

/// Window onto one tensor's storage. Element i is in communication order;
/// for row and element granularity that is plain row-major order.
class TensorView {
 public:
  const std::string& name() const { return placed_->name; }
  Index size() const { return placed_->numel(); }
  const std::vector<Segment>& segments() const { return *segments_; }

  float get(Index i) const;
  void set(Index i, float v);
  /// Storage of segment k, aliasing the device region.
  std::span<float> segment_span(std::size_t k) const;
  /// Copy of the tensor contents, communication order.
  std::vector<float> read() const;
  void write(std::span<const float> values);

 private:
  friend class DBuffer;
  TensorView(DBuffer* buf, const PlacedTensor* placed,
             const std::vector<Segment>* segments)
      : buf_(buf), placed_(placed), segments_(segments) {}
  const Segment& locate(Index i) const;

  DBuffer* buf_;
  const PlacedTensor* placed_;
  const std::vector<Segment>* segments_;
};

/// One contiguous region of S elements per device plus a tensor->segment
/// map fixed at construction.
class DBuffer {
 public:
  /// Throws MeshMismatch unless mesh.size() equals plan.devices.
  DBuffer(LayoutPlan plan, const SimMesh& mesh);

  const LayoutPlan& plan() const { return plan_; }
  const std::vector<int>& mesh_shape() const { return mesh_shape_; }
  Index devices() const { return plan_.devices; }
  Index shard_size() const { return plan_.shard_size; }

  std::span<float> region(Index device);
  std::span<const float> region(Index device) const;

  TensorView view(std::string_view name);
  const std::vector<Segment>& segments(std::string_view name) const;
  /// Tensor contents in communication order.
  std::vector<float> read(std::string_view name) const;
  /// Owned [begin, end) runs of a device region, adjacent tensors merged.
  const std::vector<std::pair<Index, Index>>& owned_runs(Index device) const;

  std::uint64_t epoch() const { return epoch_; }
  void advance_epoch() { ++epoch_; }

  /// Applies `op` to every owned element in one pass per device region.
  /// Padding is left untouched. AddFrom needs an identically planned buffer
  /// (ShapeMismatch otherwise).
  void apply(const GroupedOp& op);

  /// AllGather of the device regions. The collective input is the region
  /// itself; every device gets the m*S staging result.
  std::vector<std::vector<float>> stage_gather(const SimMesh& mesh) const;

  /// Row-major tensor recovered from a gathered buffer. `reshuffle` stands in
  /// for the plan's block layout, e.g. a StridedRaggedShard permutation.
  std::vector<float> materialize(
      std::string_view name, std::span<const float> gathered,
      const std::optional<BlockPermutation>& reshuffle = std::nullopt) const;

 private:
  std::size_t index_of(std::string_view name) const;

  LayoutPlan plan_;
  std::vector<int> mesh_shape_;
  std::vector<std::vector<float>> storage_;
  std::vector<std::vector<Segment>> views_;
  std::vector<std::vector<std::pair<Index, Index>>> owned_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::uint64_t epoch_ = 0;
};

/// Per-tensor reference for DBuffer::apply, one tensor view at a time.
void apply_sequential(DBuffer& buf, const GroupedOp& op);

}  // namespace raggedshard
