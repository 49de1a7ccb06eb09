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

#include <set>
#include <utility>

#include "raggedshard/error.hpp"
#include "raggedshard/planner.hpp"

namespace raggedshard {

namespace {

// Direct transcription of the three layout constraints for one tensor.
bool admissible(Index begin, Index numel, Index block, Index shard,
                Index devices) {
  const Index end = begin + numel;
  if (end > devices * shard) return false;
  for (Index k = 1; k <= devices; ++k) {
    const Index b = k * shard;
    if (!(b <= begin || b >= end || (b - begin) % block == 0)) return false;
  }
  return true;
}

class Search {
 public:
  Search(std::vector<std::pair<Index, Index>> items, Index shard,
         Index devices)
      : items_(std::move(items)), shard_(shard), devices_(devices) {}

  // Is there any assignment of start offsets for items_[i..] beginning at or
  // after `cursor`? Failed (i, cursor) states are memoized.
  bool feasible(std::size_t i, Index cursor) {
    if (i == items_.size()) return true;
    if (dead_.count({i, cursor})) return false;
    const auto [numel, block] = items_[i];
    for (Index begin = cursor; begin + numel <= devices_ * shard_; ++begin) {
      if (admissible(begin, numel, block, shard_, devices_) &&
          feasible(i + 1, begin + numel)) {
        return true;
      }
    }
    dead_.insert({i, cursor});
    return false;
  }

 private:
  std::vector<std::pair<Index, Index>> items_;
  Index shard_;
  Index devices_;
  std::set<std::pair<std::size_t, Index>> dead_;
};

}  // namespace

Index oracle_min_shard(const PlanProblem& problem, const OracleLimits& limits) {
  check_problem(problem);
  Index total = 0;
  for (const auto& t : problem.tensors) total += t.numel();
  if (problem.tensors.size() > limits.max_tensors ||
      total > limits.max_elements || problem.devices > limits.max_devices) {
    throw Error(ErrorCode::LimitExceeded,
                "oracle instance too large: " +
                    std::to_string(problem.tensors.size()) + " tensors, " +
                    std::to_string(total) + " elements, " +
                    std::to_string(problem.devices) + " devices");
  }
  if (problem.tensors.empty()) return 0;

  std::vector<std::pair<Index, Index>> items;
  for (std::size_t idx : layout_order(problem)) {
    const auto& t = problem.tensors[idx];
    items.emplace_back(t.numel(), resolve_granularity(t));
  }

  const Index g = problem.g_coll;
  const Index lower = round_up(ceil_div(total, problem.devices), g);
  // A shard of round_up(total, g) holds the whole group on device 0.
  for (Index shard = lower; shard <= round_up(total, g); shard += g) {
    Search search(items, shard, problem.devices);
    if (search.feasible(0, 0)) return shard;
  }
  throw Error(ErrorCode::InternalInconsistency,
              "oracle found no feasible shard size");
}

}  // namespace raggedshard
