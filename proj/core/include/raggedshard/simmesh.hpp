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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace raggedshard {

struct MeshDim {
  std::string name;
  int size = 1;
};

namespace detail {
class World;
}

class SimMesh;

/// Per-rank handle passed to an SPMD program. Collectives block until every
/// rank of the group along `dim` has entered the same call; any mismatch in
/// operation, tag or shape metadata aborts the whole run with
/// Error(CollectiveMismatch) instead of hanging.
class Communicator {
 public:
  int rank() const { return rank_; }
  const SimMesh& mesh() const { return *mesh_; }

  /// Ranks of my group along `dim`, ordered by their coordinate on `dim`.
  std::vector<int> group(int dim) const;
  /// My coordinate on `dim`.
  int group_index(int dim) const;

  /// Every member receives every member's payload (lengths may differ).
  std::vector<std::vector<float>> all_gather(int dim,
                                             std::span<const float> local,
                                             std::string_view tag);
  /// send[j] goes to the j-th member; result[j] came from the j-th member.
  std::vector<std::vector<float>> all_to_all(
      int dim, std::vector<std::vector<float>> send, std::string_view tag);
  /// Element-wise sum, folded left in group order.
  std::vector<float> all_reduce(int dim, std::span<const float> local,
                                std::string_view tag);
  void barrier(int dim, std::string_view tag);

 private:
  friend class SimMesh;
  Communicator(const SimMesh& mesh, detail::World& world, int rank,
               std::optional<std::uint64_t> jitter_seed);

  std::vector<std::vector<float>> exchange(int dim, std::string op,
                                           std::string meta,
                                           std::vector<std::vector<float>> payload,
                                           bool personalized);

  const SimMesh* mesh_;
  detail::World* world_;
  int rank_;
  std::vector<std::uint64_t> sequence_;
  std::optional<std::uint64_t> jitter_state_;
};

/// In-process N-dimensional device mesh; ranks are row-major over the dims
/// (dim 0 outermost). run() executes one logical worker per rank.
class SimMesh {
 public:
  explicit SimMesh(std::vector<MeshDim> dims);
  static SimMesh line(int ranks, std::string name = "dp");

  int size() const { return size_; }
  int ndim() const { return static_cast<int>(dims_.size()); }
  const MeshDim& dim(int d) const { return dims_.at(static_cast<std::size_t>(d)); }
  const std::vector<MeshDim>& dims() const { return dims_; }

  std::vector<int> coords(int rank) const;
  int rank_of(std::span<const int> coords) const;
  /// Ranks sharing every coordinate with `rank` except the one on `dim`.
  std::vector<int> group(int rank, int dim) const;

  /// Randomized per-rank delays before each collective, to vary the
  /// interleaving between runs. Results must not depend on it.
  void set_jitter_seed(std::optional<std::uint64_t> seed) { jitter_seed_ = seed; }

  /// Runs `program` once per rank, each on its own thread, and rethrows the
  /// first failure (by rank) after all ranks have stopped.
  void run(const std::function<void(Communicator&)>& program) const;

 private:
  std::vector<MeshDim> dims_;
  int size_ = 1;
  std::optional<std::uint64_t> jitter_seed_;
};

}  // namespace raggedshard
