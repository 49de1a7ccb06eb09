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
#include <vector>

#include "raggedshard/placement.hpp"
#include "raggedshard/simmesh.hpp"
#include "raggedshard/tensor.hpp"

namespace raggedshard {

/// A logical global tensor spread over a SimMesh. placements[d] describes
/// mesh dim d. Local payload layouts:
///   Replicate, Partial  full tensor, row-major
///   Shard(k)            chunk of dim k (ceil-sized chunks), row-major
///   RaggedShard         counts[r] blocks of the communication layout
/// At most one mesh dim may shard; the others are Replicate or Partial.
struct DistTensor {
  TensorSpec spec;
  std::vector<Placement> placements;
  std::vector<std::vector<float>> locals;
};

/// Expected payload length per rank; throws ShapeMismatch or
/// UnsupportedConversion for placements this model does not describe.
std::vector<Index> local_sizes(const TensorSpec& spec,
                               std::span<const Placement> placements,
                               const SimMesh& mesh);

void check_dist_tensor(const DistTensor& x, const SimMesh& mesh);

/// Builds a DistTensor from a row-major global tensor. Partial placements put
/// the value on coordinate 0 and zeros elsewhere.
DistTensor distribute(const TensorSpec& spec, std::span<const float> global,
                      std::vector<Placement> placements, const SimMesh& mesh);

/// Converts `x` to `target`, changing one mesh dim at a time. Supported on
/// the changing dim: RaggedShard->Replicate, Replicate->RaggedShard,
/// RaggedShard->RaggedShard, Partial->RaggedShard, Partial->Replicate, and
/// identity. Partial sums fold left in group order.
DistTensor redistribute(const DistTensor& x, const std::vector<Placement>& target,
                        const SimMesh& mesh);

/// Row-major global tensor (Partial contributions summed).
std::vector<float> full_tensor(const DistTensor& x, const SimMesh& mesh);

enum class ReductionPath { InnerFirst, OuterFirst };

/// (Partial, Partial) on a 2D mesh to (Replicate, Shard(0)). Either path
/// folds contributions in global rank order, so both give identical bits.
DistTensor reduce_partial_2d(const DistTensor& x, const SimMesh& mesh,
                             ReductionPath path = ReductionPath::InnerFirst);

}  // namespace raggedshard
