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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raggedshard/tensor.hpp"

namespace raggedshard {

/// Tensor order used to lay a group into the communication buffer.
enum class Ordering { Default, ByBlockSize, ByShape };

std::string_view to_string(Ordering o);
std::optional<Ordering> parse_ordering(std::string_view s);

/// One communication group: tensors sharded over `devices` ranks with a
/// collective that prefers buffers in multiples of `g_coll` elements.
struct PlanProblem {
  std::vector<TensorSpec> tensors;
  Index devices = 1;
  Index g_coll = 1;
  Ordering ordering = Ordering::Default;
};

/// Collective alignment in elements: ceil(alignment_bytes / elem_bytes).
Index default_g_coll(int elem_bytes, int alignment_bytes = 16);

/// Throws on invalid tensors (shape, granularity), mixed element widths,
/// duplicate names, devices < 1 or g_coll < 1.
void check_problem(const PlanProblem& problem);

/// Indices into problem.tensors in buffer order. Default keeps order_index;
/// ByBlockSize puts larger blocks first; ByShape groups equal shapes with
/// larger shapes first. All sorts are stable.
std::vector<std::size_t> layout_order(const PlanProblem& problem);

/// Blocks [first_block, last_block] of one tensor that all end up on shard
/// number `shards` (1-based), i.e. a run of constant dp value.
struct DpSegment {
  Index first_block = 0;
  Index last_block = 0;
  Index shards = 0;

  friend bool operator==(const DpSegment&, const DpSegment&) = default;
};

/// Segment-compressed dp table of one CheckValidShard run. Entries are in
/// buffer order and cover only the tensors placed before a failure.
struct DpState {
  Index shard_size = 0;
  std::vector<std::size_t> order;
  std::vector<Index> starts;
  std::vector<std::vector<DpSegment>> segments;
  Index shards_used = 0;
};

struct Feasibility {
  bool feasible = false;
  DpState state;
};

/// Decides whether the group fits into `devices` shards of `shard_size`
/// elements under the fixed tensor order. Each tensor is placed at its
/// leftmost admissible offset, which minimizes every dp(t, i; S); runs of
/// blocks on the same shard are recorded as one segment.
///
/// Requires shard_size >= 1 and shard_size % g_coll == 0.
Feasibility check_valid_shard(const PlanProblem& problem, Index shard_size);

struct SearchOptions {
  /// Also search multiples of g_coll alone, before any block size is folded
  /// into the unit.
  bool search_empty_prefix = true;
};

/// Per-unit outcome of the shard-size search, for reporting and tests.
struct SearchTrace {
  std::vector<Index> units;
  std::vector<Index> best_per_unit;
  Index feasibility_checks = 0;
};

/// Smallest shard size found by binary search over multiples of each
/// LCM-prefix unit (tensors sorted by element count, g_coll folded in).
/// Returns 0 for a group without tensors.
Index min_shard_size(const PlanProblem& problem, const SearchOptions& options = {},
                     SearchTrace* trace = nullptr);

struct Interval {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct DeviceSlice {
  Index device = 0;
  Interval local;

  friend bool operator==(const DeviceSlice&, const DeviceSlice&) = default;
};

struct PlacedTensor {
  std::size_t tensor_index = 0;
  std::size_t order_index = 0;
  std::string name;
  std::vector<Index> shape;
  Granularity granularity = Granularity::element();
  Index block_elements = 1;
  Interval interval;
  std::vector<DeviceSlice> owners;

  Index numel() const { return interval.size(); }
  friend bool operator==(const PlacedTensor&, const PlacedTensor&) = default;
};

struct LayoutPlan {
  Index devices = 0;
  Index shard_size = 0;
  Index g_coll = 1;
  int elem_bytes = 0;
  Ordering ordering = Ordering::Default;
  /// Buffer order.
  std::vector<PlacedTensor> tensors;
  std::vector<Interval> padding;

  Index buffer_size() const { return devices * shard_size; }
  const PlacedTensor* find(std::string_view name) const;

  friend bool operator==(const LayoutPlan&, const LayoutPlan&) = default;
};

/// Derives owners and padding for tensors placed at `starts` in `order`.
LayoutPlan assemble_plan(const PlanProblem& problem, Index shard_size,
                         std::span<const std::size_t> order,
                         std::span<const Index> starts);

/// Reconstructs the leftmost layout recorded in `state`. Throws
/// InternalInconsistency if the segments cannot be realized.
LayoutPlan build_plan(const PlanProblem& problem, Index shard_size,
                      const DpState& state);

struct Violation {
  enum class Kind {
    NonShardedBlock,
    Overlap,
    Contiguity,
    OutOfBounds,
    Balance,
    Alignment,
    Order,
    MissingTensor,
    UnknownTensor,
    OwnerMismatch,
    PaddingMismatch,
  };

  Kind kind;
  std::string tensor;
  std::string other;
  /// Device boundary k (boundary offset k*S), or -1.
  Index boundary = -1;
  std::string detail;
};

std::string_view to_string(Violation::Kind k);
std::string to_string(const Violation& v);

/// Empty iff the plan meets the non-sharded-block, contiguity and balance
/// constraints for `problem` and is internally consistent.
std::vector<Violation> validate_plan(const LayoutPlan& plan,
                                     const PlanProblem& problem);

struct PaddingReport {
  Index padding_elements = 0;
  Index tensor_elements = 0;
  double ratio = 0.0;
};

PaddingReport padding_report(const LayoutPlan& plan);

struct PlannerOptions {
  SearchOptions search;
  /// Plan with all three orderings and keep the smallest shard size.
  bool try_all_orderings = false;
};

struct PlanResult {
  LayoutPlan plan;
  PaddingReport padding;
  std::vector<Violation> violations;
  double seconds = 0.0;
};

/// Stateless driver: min_shard_size, check_valid_shard, build_plan and
/// validate_plan in sequence. Safe to share across threads.
class Planner {
 public:
  explicit Planner(PlannerOptions options = {}) : options_(options) {}

  PlanResult plan(const PlanProblem& problem) const;
  const PlannerOptions& options() const { return options_; }

 private:
  PlannerOptions options_;
};

struct OracleLimits {
  std::size_t max_tensors = 6;
  Index max_elements = 256;
  Index max_devices = 4;
};

/// Exact minimum shard size for the fixed tensor order, by exhaustive
/// search over shard sizes (multiples of g_coll, from the lower bound up)
/// and over all padding assignments between tensors. Does not use the
/// planner's placement rule. Throws LimitExceeded outside `limits`.
Index oracle_min_shard(const PlanProblem& problem,
                       const OracleLimits& limits = {});

/// Problem that a plan was built for, recovered from the plan itself.
PlanProblem problem_of(const LayoutPlan& plan);

/// Ragged block counts per device for one placed tensor.
std::vector<Index> ragged_counts_of(const PlacedTensor& t, Index devices);

}  // namespace raggedshard
