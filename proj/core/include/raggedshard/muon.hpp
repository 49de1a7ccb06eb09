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
#include <unordered_map>
#include <vector>

#include "raggedshard/redistribute.hpp"
#include "raggedshard/simmesh.hpp"

namespace raggedshard {

/// Orthogonalizes a row-major rows x cols matrix with the cubic iteration
/// X <- 1.5 X - 0.5 X X^T X after scaling by the Frobenius norm. Computed in
/// double. Throws ZeroMatrix for an all-zero input.
std::vector<float> newton_schulz(std::span<const float> m, Index rows, Index cols,
                                 int steps = 10);

struct MuonConfig {
  float lr = 0.02f;
  float beta = 0.95f;
  bool nesterov = false;
  int ns_steps = 10;
};

struct MuonState {
  MuonConfig config;
  /// Momentum per parameter name, placed like the gradient.
  std::unordered_map<std::string, DistTensor> momentum;
  /// Elements assigned to each root candidate so far.
  std::vector<Index> ledger;
};

/// m <- beta m + g; returns m, or g + beta m with Nesterov. Throws
/// PlacementMismatch if the stored momentum is placed differently from g.
DistTensor momentum_update(const DistTensor& g, MuonState& state);

/// Least-loaded rank, ties to the lowest; charges `param_size` to it.
int select_root(std::vector<Index>& ledger, Index param_size);

/// One distributed Muon step for a RaggedShard-placed matrix: momentum,
/// gather to a load-balanced root, Newton-Schulz there, scatter back to the
/// original placement, w <- w - lr o. Throws NotMatrix for non-2D w and
/// PlacementMismatch when g is placed differently from w.
DistTensor muon_step(const DistTensor& w, const DistTensor& g, MuonState& state,
                     const SimMesh& mesh);

/// Heavy-ball SGD for parameters Muon does not handle: w <- w - lr m.
DistTensor momentum_sgd_step(const DistTensor& w, const DistTensor& g, MuonState& state);

/// Single-rank reference on full row-major tensors.
class LocalMuon {
 public:
  explicit LocalMuon(MuonConfig config = {}) : config_(config) {}

  /// Muon update for a matrix; returns the applied update o.
  std::vector<float> step(const std::string& name, std::span<const Index> shape,
                          std::vector<float>& w, std::span<const float> g);
  void sgd_step(const std::string& name, std::vector<float>& w,
                std::span<const float> g);

 private:
  std::vector<float> momentum(const std::string& name, std::span<const float> g);

  MuonConfig config_;
  std::unordered_map<std::string, std::vector<float>> momentum_;
};

}  // namespace raggedshard
